"""Command line front end: ``quadgen <subcommand>``.

Exit codes: 0 success, 1 generation or verification failure, 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import baselines as bl
from .domains import (DOMAIN_I, DOMAIN_II, Box, EmpiricalMeasure, Measure, RidgeMeasure, TensorMeasure,
                      banana, random_orthonormal_rows)
from .indexset import MultiIndexSet, anova_set, ball_set, maximal_half_set, total_degree_set
from .moments import build_problem
from .orthopoly import Univariate, gauss_rule, radau_family_rule, recurrence_coefficients
from .reduce import GenerateOptions, QuadratureRule, generate, verify
from . import testmodels as tm

log = logging.getLogger("quadgen")

MEASURE_SCHEMA = "quadgen.measure/1"
BASELINE_SCHEMA = "quadgen.baseline/1"
GAUSS_SCHEMA = "quadgen.gauss/1"


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- configs

def _univariate(spec: dict) -> Univariate:
    fam = spec.get("family", "uniform")
    lo, hi = spec.get("interval", [-1.0, 1.0])
    if fam == "uniform":
        return Univariate("uniform", lo, hi)
    if fam == "jacobi":
        return Univariate("jacobi", lo, hi, float(spec.get("alpha", 0.0)), float(spec.get("beta", 0.0)))
    if fam == "gaussian":
        return Univariate("gaussian", lo, hi)
    raise ConfigError(f"unknown univariate family {fam!r}")


def _box(spec) -> Box:
    if isinstance(spec, str):
        try:
            return {"I": DOMAIN_I, "II": DOMAIN_II}[spec]
        except KeyError:
            raise ConfigError(f"unknown named domain {spec!r}") from None
    lo, hi = spec
    return Box(lo, hi)


def measure_from_config(cfg: dict) -> Measure:
    """Build a measure from a config dict (also accepts ``Measure.describe()`` output).

    Types: ``uniform`` (dim, lower, upper), ``tensor`` (factors), ``banana``
    (domain: "I", "II" or [[lo], [hi]]), ``density`` with name banana,
    ``empirical`` (csv, optional box) and ``ridge`` (A, or s/d/seed).
    """
    if not isinstance(cfg, dict):
        raise ConfigError("measure config must be a JSON object")
    if cfg.get("schema", MEASURE_SCHEMA) != MEASURE_SCHEMA:
        raise ConfigError(f"unsupported measure schema {cfg.get('schema')!r}")
    kind = cfg.get("type")
    try:
        if kind == "uniform":
            d = int(cfg["dim"])
            return TensorMeasure.uniform_cube(d, float(cfg.get("lower", -1.0)), float(cfg.get("upper", 1.0)))
        if kind == "tensor":
            return TensorMeasure(tuple(_univariate(f) for f in cfg["factors"]))
        if kind == "banana" or (kind == "density" and cfg.get("name") == "banana"):
            target = cfg.get("domain", cfg.get("target"))
            return banana(None if target is None else _box(target))
        if kind == "empirical":
            box = cfg.get("box")
            return EmpiricalMeasure.from_csv(cfg["csv"], None if box is None else _box(box))
        if kind == "ridge":
            if "A" in cfg:
                A = np.asarray(cfg["A"], dtype=float)
            else:
                A = random_orthonormal_rows(int(cfg["s"]), int(cfg["d"]), int(cfg.get("seed", 0)))
            base = measure_from_config(cfg["base"]) if "base" in cfg else None
            return RidgeMeasure.build(A, base)
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise ConfigError(f"invalid {kind} measure config: {exc}") from exc
    raise ConfigError(f"unknown measure type {kind!r}")


def load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def index_set_from_args(d: int, degree: int, anova_order: int | None = None, p: float = 1.0) -> MultiIndexSet:
    if anova_order is not None:
        return anova_set(d, anova_order, degree)
    if p == 1.0:
        return total_degree_set(d, degree)
    return ball_set(d, p, degree)


def problem_from_config(cfg: dict, lam: MultiIndexSet):
    measure = measure_from_config(cfg)
    mom = cfg.get("moments", {})
    method = mom.get("method", "auto")
    return build_problem(measure, lam, moments=method, n_samples=mom.get("n"), seed=mom.get("seed", 0))


# ---------------------------------------------------------------- subcommands

def _write(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_indexset(args) -> int:
    lam = index_set_from_args(args.dim, args.degree, args.anova_order, args.p)
    data = json.loads(lam.to_json())
    data["size"] = len(lam)
    data["heuristic"] = -(-len(lam) // (lam.dim + 1))
    if args.half_set:
        hs = maximal_half_set(lam)
        data["L"] = hs.size
        data["half_set_unique"] = hs.unique
        data["half_set_exact"] = hs.exact
        data["half_set"] = [list(a) for a in hs.theta]
    _write(json.dumps(data, indent=1), args.out)
    return 0


def cmd_moments(args) -> int:
    cfg = load_json(args.measure)
    lam = index_set_from_args(cfg_dim(cfg, args), args.degree, args.anova_order)
    problem = problem_from_config(cfg, lam)
    _write(problem.to_json(), args.out)
    return 0


def cfg_dim(cfg: dict, args) -> int:
    if getattr(args, "dim", None):
        return args.dim
    return measure_from_config(cfg).dim


def cmd_gauss(args) -> int:
    u = _univariate({"family": args.family, "interval": [args.lower, args.upper],
                     "alpha": args.alpha, "beta": args.beta})
    rec = recurrence_coefficients(u, args.points + 1)
    rule = gauss_rule(rec, args.points) if args.radau is None else radau_family_rule(rec, args.points, args.radau)
    _write(json.dumps({"schema": GAUSS_SCHEMA, "family": args.family, "points": args.points,
                       "radau_c": args.radau, "nodes": rule.nodes.tolist(),
                       "weights": rule.weights.tolist()}, indent=1), args.out)
    return 0


def cmd_generate(args) -> int:
    cfg = load_json(args.measure)
    measure = measure_from_config(cfg)
    lam = index_set_from_args(measure.dim, args.degree, args.anova_order)
    problem = problem_from_config(cfg, lam)
    opts = GenerateOptions(seed=args.seed, S=args.candidates, max_increments=args.max_increments,
                           max_iter=args.max_iter)
    rule = generate(problem, opts)
    rule.metadata["moments"] = problem.info.get("moments")
    rule.metadata["measure_config"] = cfg
    _write(rule.to_json(), args.out)
    if args.dump_initial and rule.initial is not None:
        _write(rule.initial.to_json(), args.dump_initial)
    log.info("rule with %d points, residual %.3e, success %s", rule.size, rule.residual, rule.success)
    return 0 if rule.success else 1


def cmd_verify(args) -> int:
    try:
        rule = QuadratureRule.from_json(open(args.rule).read())
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read rule {args.rule}: {exc}") from exc
    cfg = load_json(args.measure) if args.measure else rule.metadata.get("measure_config") \
        or rule.metadata.get("measure")
    if cfg is None or rule.index_set is None:
        raise ConfigError("rule carries no measure or index set; pass --measure")
    problem = problem_from_config(cfg, rule.index_set)
    rep = verify(rule, problem)
    rep["positive"] = bool(np.all(rule.weights >= 0))
    rep["inside"] = bool(np.all(problem.domain.contains(rule.nodes, 1e-10)))
    if not args.table:
        rep.pop("table")
    print(json.dumps(rep, indent=1))
    ok = rep["residual_l2"] ** 2 < args.tol and rep["positive"] and rep["inside"]
    return 0 if ok else 1


def cmd_baseline(args) -> int:
    rule = bl.baseline(args.kind, args.dim, args.param, args.seed)
    _write(json.dumps({"schema": BASELINE_SCHEMA, "kind": rule.kind, "param": rule.param, "dim": args.dim,
                       "nodes": rule.nodes.tolist(), "weights": rule.weights.tolist()}, indent=1), args.out)
    return 0


# ---------------------------------------------------------------- benchmark

METHODS = ("reduced", "l1-initial", "mc", "sobol", "sparse-grid", "stroud2", "stroud3")
CSV_COLUMNS = ["method", "param", "rep", "n_points", "estimate", "reference", "abs_error",
               "median_error", "min_error", "max_error"]


@dataclass
class BenchmarkSpec:
    """One convergence study.

    ``degrees`` drive reduced and l1-initial rules, ``levels`` sparse grids
    and ``sizes`` Monte Carlo and Sobol.  ``measure`` overrides the default
    measure of the integrand; ``moments`` selects sample-based moments.
    """

    integrand: str
    dim: int = 2
    params: dict = field(default_factory=dict)
    measure: dict | None = None
    methods: list = field(default_factory=lambda: ["reduced", "l1-initial"])
    degrees: list = field(default_factory=lambda: list(range(1, 11)))
    levels: list = field(default_factory=list)
    sizes: list = field(default_factory=list)
    reps: int = 1
    seed: int = 0
    anova_order: int | None = None
    moments: dict | None = None

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ConfigError(f"unknown methods {sorted(bad)}")
        if not (self.degrees or self.levels or self.sizes):
            raise ConfigError("empty sweep")


@dataclass
class BenchmarkSetup:
    measure: Measure
    f_measure: object       # integrand in measure coordinates
    f_full: object          # integrand on the baseline box [-1,1]^D (density folded in)
    full_dim: int
    reference: float
    uniform_box: Box | None


def setup_benchmark(spec: BenchmarkSpec) -> BenchmarkSetup:
    name = spec.integrand
    coef_seed = spec.params.get("coef_seed", 0)
    if name in ("cp", "mcp"):
        c = spec.params.get("c") or tm.random_coefficients(spec.dim, coef_seed).tolist()
        integ = tm.corner_peak(c) if name == "cp" else tm.modified_corner_peak(c)
        cube = Box.cube(spec.dim)
        g = integ.on(cube)
        measure = measure_from_config(spec.measure) if spec.measure else TensorMeasure.uniform_cube(spec.dim)
        return BenchmarkSetup(measure, g, g, spec.dim, integ.reference_mean, cube)
    refs = tm.reference_means()
    if name == "chem":
        domain = spec.params.get("domain", "I")
        measure = measure_from_config(spec.measure or {"type": "banana", "domain": domain})
        box = measure.domain
        chem = tm.chemical_integrand(box)
        key = f"chem-{domain}"
        if key not in refs:
            raise ConfigError(f"no reference mean {key!r}; run scripts/compute_references.py")
        cube = Box.cube(2)
        full = bl.fold_density(chem, measure, box)
        amap_f = tm.Integrand(full, box, "chem-folded").on(cube)
        return BenchmarkSetup(measure, chem, amap_f, 2, refs[key]["value"], cube)
    if name == "chem-ridge":
        s, d = int(spec.params.get("s", 2)), int(spec.params.get("d", 20))
        A = random_orthonormal_rows(s, d, int(spec.params.get("A_seed", 0)))
        measure = RidgeMeasure.build(A)
        inner = tm.chem_ridge_inner(measure.domain.bounding_box)
        key = f"chem-ridge-s{s}-d{d}-A{int(spec.params.get('A_seed', 0))}"
        if key not in refs:
            raise ConfigError(f"no reference mean {key!r}; run scripts/compute_references.py")
        full = tm.ridge_integrand(inner, A)
        return BenchmarkSetup(measure, inner, full, d, refs[key]["value"], None)
    raise ConfigError(f"unknown integrand {name!r}")


def _reduced_task(spec: BenchmarkSpec, degree: int, rep: int):
    st = setup_benchmark(spec)
    lam = index_set_from_args(st.measure.dim, degree, spec.anova_order)
    mom = spec.moments or {}
    problem = build_problem(st.measure, lam, moments=mom.get("method", "auto"), n_samples=mom.get("n"),
                            seed=mom.get("seed", 1000 + rep))
    rule = generate(problem, GenerateOptions(seed=spec.seed + rep))
    out = []
    if "reduced" in spec.methods:
        out.append(("reduced", degree, rep, rule.size, rule.integrate(st.f_measure)))
    if "l1-initial" in spec.methods and rule.initial is not None:
        out.append(("l1-initial", degree, rep, rule.initial.size, rule.initial.integrate(st.f_measure)))
    return out


def _baseline_task(spec: BenchmarkSpec, method: str, param: int, rep: int):
    st = setup_benchmark(spec)
    D = st.full_dim
    if method == "mc":
        r = bl.monte_carlo(TensorMeasure.uniform_cube(D), param, spec.seed + rep)
    elif method == "sobol":
        r = bl.sobol_rule(D, param)
    elif method == "sparse-grid":
        r = bl.sparse_grid(D, param)
    else:
        r = bl.stroud(D, int(method[-1]))
    return [(method, param, rep, r.size, r.integrate(st.f_full))]


def run_benchmark(spec: BenchmarkSpec, jobs: int = 1) -> list[dict]:
    """Evaluate every (method, parameter, repetition) and return tidy rows."""
    st = setup_benchmark(spec)
    tasks = []
    if {"reduced", "l1-initial"} & set(spec.methods):
        tasks += [(_reduced_task, (spec, k, r)) for k in spec.degrees for r in range(spec.reps)]
    for m in spec.methods:
        if m == "mc":
            tasks += [(_baseline_task, (spec, m, n, r)) for n in spec.sizes for r in range(spec.reps)]
        elif m == "sobol":
            tasks += [(_baseline_task, (spec, m, n, 0)) for n in spec.sizes]
        elif m == "sparse-grid":
            tasks += [(_baseline_task, (spec, m, lv, 0)) for lv in spec.levels]
        elif m in ("stroud2", "stroud3"):
            tasks.append((_baseline_task, (spec, m, int(m[-1]), 0)))
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_call, tasks))
    else:
        results = [_call(t) for t in tasks]
    rows = [dict(zip(CSV_COLUMNS[:5], r)) for res in results for r in res]
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        row["reference"] = st.reference
        row["abs_error"] = abs(row["estimate"] - st.reference)
        groups.setdefault((row["method"], row["param"]), []).append(row["abs_error"])
    for row in rows:
        errs = groups[(row["method"], row["param"])]
        row.update(median_error=float(np.median(errs)), min_error=min(errs), max_error=max(errs))
    rows.sort(key=lambda r: (METHODS.index(r["method"]), r["param"], r["rep"]))
    return rows


def _call(task):
    fn, args = task
    return fn(*args)


def write_csv(rows: list[dict], out):
    fh = open(out, "w", newline="") if isinstance(out, str) else out
    try:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow(r)
    finally:
        if isinstance(out, str):
            fh.close()


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def cmd_benchmark(args) -> int:
    if args.spec:
        spec = BenchmarkSpec(**load_json(args.spec))
    else:
        spec = BenchmarkSpec(args.integrand, args.dim, {}, None, args.methods.split(","),
                             _int_list(args.degrees), _int_list(args.levels), _int_list(args.sizes),
                             args.reps, args.seed, args.anova_order)
    rows = run_benchmark(spec, args.jobs)
    write_csv(rows, args.out or sys.stdout)
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quadgen", description="Positive quadrature rules by moment matching")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("indexset", help="build an index set and optionally its maximal half-set")
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--degree", type=int, required=True)
    s.add_argument("--anova-order", type=int)
    s.add_argument("--p", type=float, default=1.0, help="l_p ball exponent (ignored with --anova-order)")
    s.add_argument("--half-set", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_indexset)

    s = sub.add_parser("moments", help="compute the moment vector of a measure")
    s.add_argument("--measure", required=True)
    s.add_argument("--degree", type=int, required=True)
    s.add_argument("--anova-order", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_moments)

    s = sub.add_parser("gauss", help="univariate Gauss or Radau-family rule")
    s.add_argument("--family", choices=["uniform", "jacobi", "gaussian"], default="uniform")
    s.add_argument("--points", type=int, required=True)
    s.add_argument("--alpha", type=float, default=0.0)
    s.add_argument("--beta", type=float, default=0.0)
    s.add_argument("--lower", type=float, default=-1.0)
    s.add_argument("--upper", type=float, default=1.0)
    s.add_argument("--radau", type=float, help="c in q_M - c q_{M-1}")
    s.add_argument("--out")
    s.set_defaults(func=cmd_gauss)

    s = sub.add_parser("generate", help="generate a reduced quadrature rule")
    s.add_argument("--measure", required=True)
    s.add_argument("--degree", type=int, required=True)
    s.add_argument("--anova-order", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--candidates", type=int, help="candidate mesh size S")
    s.add_argument("--max-increments", type=int, default=10)
    s.add_argument("--max-iter", type=int, default=1000)
    s.add_argument("--out")
    s.add_argument("--dump-initial", help="also write the l1 stage rule here")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("verify", help="recompute the moment residual of a rule")
    s.add_argument("rule")
    s.add_argument("--measure", help="measure config (defaults to the one stored in the rule)")
    s.add_argument("--tol", type=float, default=1e-8, help="pass threshold on the squared residual")
    s.add_argument("--table", action="store_true", help="print the per-moment table")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("baseline", help="emit a baseline rule on [-1,1]^d")
    s.add_argument("--kind", choices=["mc", "sobol", "sparse_grid", "stroud2", "stroud3"], required=True)
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--param", type=int, default=0, help="size (mc, sobol) or level (sparse_grid)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_baseline)

    s = sub.add_parser("benchmark", help="convergence study written as CSV")
    s.add_argument("--spec", help="BenchmarkSpec JSON (overrides the flags below)")
    s.add_argument("--integrand", default="cp", choices=["cp", "mcp", "chem", "chem-ridge"])
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--methods", default="reduced,l1-initial")
    s.add_argument("--degrees", default="1-10")
    s.add_argument("--levels", default="")
    s.add_argument("--sizes", default="")
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--anova-order", type=int)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, bl.DirectionFileError) as exc:
        print(f"quadgen: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
