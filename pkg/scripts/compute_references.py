"""Reference means for the surface-reaction benchmarks, written to the package data.

Banana problems I and II: dense tensor Gauss-Legendre (primary) and a
2^20-point Sobol estimate with the density folded into the integrand
(cross-check).  Ridge problem: 2^20 Sobol points in the full space.

Usage: python scripts/compute_references.py [--quick]
"""
import argparse
import json
import time
from importlib import resources

import numpy as np

from quadgen.baselines import fold_density, sobol_points
from quadgen.domains import DOMAIN_I, DOMAIN_II, RidgeMeasure, banana, random_orthonormal_rows
from quadgen.testmodels import chem_ridge_inner, chemical_integrand, ridge_integrand


def chunked(f, X, chunk=50_000):
    return np.concatenate([f(X[i:i + chunk]) for i in range(0, len(X), chunk)])


def banana_reference(name, box, n_gl, n_sobol):
    mu = banana(box)
    chem = chemical_integrand(box)
    out = {}
    for n in n_gl:
        t = time.time()
        nodes, weights = mu.reference_rule(n)
        keep = weights > 1e-300 * weights.max()
        out[f"gauss_legendre_{n}"] = float(weights[keep] @ chunked(chem, nodes[keep]))
        print(f"{name} GL {n}^2: {out[f'gauss_legendre_{n}']:.12f} ({time.time() - t:.0f}s)", flush=True)
    u = sobol_points(2, n_sobol, skip=1)
    x = box.lower + u * (box.upper - box.lower)
    g = fold_density(chem, mu, box)
    out[f"sobol_{n_sobol}"] = float(np.mean(chunked(g, x)))
    print(f"{name} Sobol {n_sobol}: {out[f'sobol_{n_sobol}']:.12f}", flush=True)
    primary = out[f"gauss_legendre_{max(n_gl)}"]
    return {"value": primary, "method": f"tensor Gauss-Legendre {max(n_gl)}^2 on the banana density",
            "checks": out}


def ridge_reference(s, d, A_seed, n_sobol):
    A = random_orthonormal_rows(s, d, A_seed)
    mu = RidgeMeasure.build(A)
    f = ridge_integrand(chem_ridge_inner(mu.domain.bounding_box), A)
    y = sobol_points(d, n_sobol, skip=1, unit=False)
    val = float(np.mean(chunked(f, y)))
    half = float(np.mean(chunked(f, y[: n_sobol // 2])))
    print(f"ridge s={s} d={d}: {val:.12f} (half-size run {half:.12f})", flush=True)
    return {"value": val, "method": f"Sobol {n_sobol} points in [-1,1]^{d}", "checks": {"half": half}}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="small sizes for a smoke run")
    ap.add_argument("--out")
    args = ap.parse_args()
    n_gl = [50, 100] if args.quick else [100, 200]
    n_sob = 2 ** 14 if args.quick else 2 ** 20
    refs = {
        "chem-I": banana_reference("chem-I", DOMAIN_I, n_gl, n_sob),
        "chem-II": banana_reference("chem-II", DOMAIN_II, n_gl, n_sob),
        "chem-ridge-s2-d20-A0": ridge_reference(2, 20, 0, n_sob),
    }
    out = args.out or str(resources.files("quadgen") / "data" / "reference_means.json")
    with open(out, "w") as fh:
        json.dump(refs, fh, indent=1)
    print("wrote", out)


if __name__ == "__main__":
    main()
