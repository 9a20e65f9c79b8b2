"""Benchmark integrands with reference means.

Corner-peak families have closed-form means evaluated in extended
precision.  The surface-reaction model is solved numerically, one point at
a time with ``solve_ivp`` or in batches with a vectorised Dormand-Prince
integrator.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import mpmath
import numpy as np
from scipy.integrate import solve_ivp

from .domains import Box, DOMAIN_I, affine_map_box

# surface-reaction constants
RATE_C, RATE_D, RATE_E, RATE_F = 0.04, 1.0, 0.36, 0.016
CHEM_RTOL, CHEM_ATOL = 1e-8, 1e-10


@dataclass
class Integrand:
    """Vectorised integrand ``f(X) -> (n,)`` on a box with an optional reference mean.

    ``reference_mean`` is the mean under the uniform probability measure on
    ``domain`` unless ``provenance`` says otherwise.
    """

    f: Callable[[np.ndarray], np.ndarray]
    domain: Box
    name: str
    params: dict = field(default_factory=dict)
    reference_mean: float | None = None
    provenance: str | None = None

    @property
    def dim(self) -> int:
        return self.domain.dim

    def __call__(self, x) -> np.ndarray:
        return self.f(np.atleast_2d(np.asarray(x, dtype=float)))

    def on(self, box: Box) -> "Integrand":
        """Same integrand pulled back to ``box`` through the affine map ``box -> domain``."""
        amap = affine_map_box(box, self.domain)
        f = self.f
        return Integrand(lambda x: f(amap(np.atleast_2d(x))), box, self.name, dict(self.params),
                         self.reference_mean, self.provenance)


def random_coefficients(d: int, seed=0, normalize: bool = True) -> np.ndarray:
    """Coefficients uniform on ``[0, 1]``, optionally scaled to sum to one."""
    c = np.random.default_rng(seed).uniform(0.0, 1.0, d)
    return c / c.sum() if normalize else c


def _corner_peak_mean(c) -> float:
    """Mean of ``(1 + c.x)^-(d+1)`` on ``[0,1]^d`` by inclusion-exclusion in extended precision.

    Integrating one coordinate at a time gives
    ``1/(d! prod c) * sum_S (-1)^|S| / (1 + sum_S c)``.
    """
    d = len(c)
    with mpmath.workdps(30 + 3 * d):
        cs = [mpmath.mpf(float(v)) for v in c]
        total = mpmath.mpf(0)
        for mask in range(1 << d):
            s = mpmath.mpf(1)
            bits = 0
            for i in range(d):
                if mask >> i & 1:
                    s += cs[i]
                    bits += 1
            total += (-1) ** bits / s
        return float(total / (mpmath.factorial(d) * mpmath.fprod(cs)))


def corner_peak(c) -> Integrand:
    """``(1 + sum c_i x_i)^-(d+1)`` on ``[0,1]^d``."""
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise ValueError("corner-peak coefficients must be positive")
    d = len(c)

    def f(x):
        return (1.0 + np.atleast_2d(x) @ c) ** (-(d + 1))

    return Integrand(f, Box.cube(d, 0.0, 1.0), "cp", {"c": c.tolist()}, _corner_peak_mean(c),
                     "inclusion-exclusion")


def pair_mean(a: float, b: float) -> float:
    """Mean of ``(1 + a x + b y)^-3`` on the unit square."""
    return _corner_peak_mean([a, b])


def modified_corner_peak(c) -> Integrand:
    """``sum_i (1 + c_i x_i + c_{i+1} x_{i+1})^-3`` on ``[0,1]^d``: only pairwise interactions."""
    c = np.asarray(c, dtype=float)
    d = len(c)
    if d < 2:
        raise ValueError("the modified corner peak needs d >= 2")

    def f(x):
        x = np.atleast_2d(x)
        return np.sum((1.0 + c[:-1] * x[:, :-1] + c[1:] * x[:, 1:]) ** -3, axis=1)

    mean = sum(pair_mean(c[i], c[i + 1]) for i in range(d - 1))
    return Integrand(f, Box.cube(d, 0.0, 1.0), "mcp", {"c": c.tolist()}, mean, "pairwise closed form")


# ---------------------------------------------------------------- surface reaction

def _chem_rhs(u, x1, x2):
    u1, u2, u3 = u
    z = 1.0 - u1 - u2 - u3
    return np.array([
        x1 * z - RATE_C * u1 - 4.0 * RATE_D * u1 * u2,
        2.0 * x2 * z * z - 4.0 * RATE_D * u1 * u2,
        RATE_E * z - RATE_F * u3,
    ])


def chemical_trajectory(x, t_end: float = 100.0, rtol: float = CHEM_RTOL, atol: float = CHEM_ATOL):
    """``solve_ivp`` result for one parameter pair, starting from an empty surface."""
    x1, x2 = float(x[0]), float(x[1])
    sol = solve_ivp(lambda t, u: _chem_rhs(u, x1, x2), (0.0, t_end), np.zeros(3), method="RK45",
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"ODE solver failed at x={x}: {sol.message}")
    return sol


def chemical_model(x, t_end: float = 100.0, rtol: float = CHEM_RTOL, atol: float = CHEM_ATOL) -> float:
    """Mass fraction ``u_3(t_end)`` of the third species."""
    if t_end == 0:
        return 0.0
    return float(chemical_trajectory(x, t_end, rtol, atol).y[2, -1])


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


def chemical_model_batch(X, t_end: float = 100.0, rtol: float = CHEM_RTOL, atol: float = CHEM_ATOL,
                         max_steps: int = 200_000) -> np.ndarray:
    """``u_3(t_end)`` for many parameter pairs, each with its own adaptive step size.

    Same embedded pair and error norm as scipy's RK45, so results agree with
    :func:`chemical_model` to within the integration tolerance.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = len(X)
    if t_end == 0 or n == 0:
        return np.zeros(n)
    x1, x2 = X[:, 0], X[:, 1]
    u = np.zeros((3, n))
    t = np.zeros(n)
    k1 = _chem_rhs(u, x1, x2)
    scale = atol + rtol * np.abs(u)
    d0 = np.sqrt(np.mean((u / scale) ** 2, axis=0))
    d1 = np.sqrt(np.mean((k1 / scale) ** 2, axis=0))
    h = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * d0 / np.maximum(d1, 1e-300))
    h = np.minimum(h, t_end)
    active = np.ones(n, dtype=bool)
    for _ in range(max_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        ua, ha, a1, a2 = u[:, idx], h[idx], x1[idx], x2[idx]
        K = [k1[:, idx]]
        for s in range(1, 7):
            du = sum(coef * K[j] for j, coef in enumerate(_DP_A[s]) if coef)
            K.append(_chem_rhs(ua + ha * du, a1, a2))
        unew = ua + ha * sum(b * k for b, k in zip(_DP_B, K) if b)
        err = ha * sum(e * k for e, k in zip(_DP_E, K) if e)
        sc = atol + rtol * np.maximum(np.abs(ua), np.abs(unew))
        enorm = np.sqrt(np.mean((err / sc) ** 2, axis=0))
        ok = enorm < 1.0
        with np.errstate(divide="ignore"):
            fac = np.where(enorm == 0, 10.0, np.clip(0.9 * enorm ** -0.2, 0.2, 10.0))
        fac = np.where(ok, fac, np.minimum(fac, 1.0))
        acc = idx[ok]
        u[:, acc] = unew[:, ok]
        t[acc] += ha[ok]
        k1[:, acc] = K[6][:, ok]
        h[idx] = ha * fac
        done = t[idx] >= t_end * (1 - 1e-14)
        active[idx[done]] = False
        h[idx] = np.minimum(h[idx], t_end - t[idx])
        if np.any(h[active] < 1e-14):
            raise RuntimeError("batch ODE step size underflow")
    else:
        raise RuntimeError("batch ODE integrator exceeded max_steps")
    return u[2]


def chemical_integrand(domain: Box = DOMAIN_I, batch: bool = True) -> Integrand:
    """Surface-reaction output as an integrand on ``domain`` (means taken elsewhere)."""

    def f(x):
        x = np.atleast_2d(x)
        return chemical_model_batch(x) if batch else np.array([chemical_model(p) for p in x])

    return Integrand(f, domain, "chem", {"domain": [domain.lower.tolist(), domain.upper.tolist()]})


def ridge_integrand(g: Integrand, A, check: bool = True) -> Integrand:
    """``f(y) = g(A y)`` on ``[-1, 1]^d``; ``g`` is evaluated on its own coordinates."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != g.dim:
        raise ValueError("A must have one row per coordinate of g")
    if check and not np.allclose(A @ A.T, np.eye(A.shape[0]), atol=1e-12):
        raise ValueError("rows of A must be orthonormal")
    gf = g.f

    def f(y):
        return gf(np.atleast_2d(y) @ A.T)

    return Integrand(f, Box.cube(A.shape[1]), f"{g.name}-ridge", {"A": A.tolist(), **g.params})


def back_map(A, x) -> np.ndarray:
    """Lift reduced-space nodes ``x`` to the full space by ``y = A^T x``."""
    return np.atleast_2d(x) @ np.atleast_2d(A)


def chem_ridge_inner(zonotope_box: Box, target: Box = DOMAIN_I) -> Integrand:
    """Surface-reaction output on the zonotope's bounding box, mapped affinely onto ``target``."""
    inner = chemical_integrand(target)
    return inner.on(zonotope_box)


def reference_means() -> dict:
    """Precomputed reference means shipped with the package (see scripts/compute_references.py)."""
    path = resources.files("quadgen") / "data" / "reference_means.json"
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        return {}

