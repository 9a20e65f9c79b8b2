"""Univariate orthonormal polynomials, Gauss-type rules and tensor bases."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .indexset import MultiIndexSet


class DegenerateMeasureError(ValueError):
    pass


@dataclass(frozen=True)
class Univariate:
    """A named univariate measure on ``[lo, hi]``.

    family is one of ``uniform``, ``jacobi`` (params: alpha, beta; weight
    ``(1-t)^alpha (1+t)^beta`` mapped to the interval), ``gaussian``
    (params: mean, std; unbounded) or ``density`` (an unnormalised weight
    function on the interval).  All measures are probability measures.
    """

    family: str
    lo: float = -1.0
    hi: float = 1.0
    alpha: float = 0.0
    beta: float = 0.0
    weight: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.family not in ("uniform", "jacobi", "gaussian", "density"):
            raise ValueError(f"unknown univariate family {self.family!r}")
        if self.family != "gaussian" and not self.lo < self.hi:
            raise ValueError("interval must have lo < hi")
        if self.family == "density" and self.weight is None:
            raise ValueError("density family needs a weight function")

    @property
    def symmetric(self) -> bool:
        if self.family == "uniform":
            return self.lo == -self.hi
        if self.family == "jacobi":
            return self.alpha == self.beta and self.lo == -self.hi
        if self.family == "gaussian":
            return self.lo == 0.0
        return False

    @property
    def bounded(self) -> bool:
        return self.family != "gaussian"


def uniform(lo: float = -1.0, hi: float = 1.0) -> Univariate:
    return Univariate("uniform", lo, hi)


def jacobi(alpha: float, beta: float, lo: float = -1.0, hi: float = 1.0) -> Univariate:
    return Univariate("jacobi", lo, hi, alpha, beta)


def gaussian(mean: float = 0.0, std: float = 1.0) -> Univariate:
    # lo/hi carry mean and std for the unbounded family
    return Univariate("gaussian", mean, std)


@dataclass(frozen=True)
class Recurrence:
    """Three-term recurrence ``b_k q_{k+1} = (t - a_k) q_k - c_k q_{k-1}``.

    For orthonormal families ``c_k = b_{k-1}`` and ``q_0 = 1/sqrt(mass)``.
    ``lower`` overrides ``c`` (used for the monomial basis, where it is 0).
    """

    a: np.ndarray
    b: np.ndarray
    mass: float = 1.0
    lower: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("a and b must be 1-d arrays of equal length")
        if np.any(b <= 0):
            raise DegenerateMeasureError("recurrence coefficients b_k must be positive")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def orthonormal(self) -> bool:
        return self.lower is None

    def c(self, k: int) -> float:
        if self.lower is not None:
            return float(self.lower[k])
        return float(self.b[k - 1]) if k > 0 else 0.0

    @classmethod
    def monomial(cls, n: int, scale: float = 1.0) -> "Recurrence":
        """Scaled monomials ``(t/scale)^k``."""
        return cls(np.zeros(n), np.full(n, float(scale)), 1.0, lower=np.zeros(n))


def _jacobi_ab(n: int, al: float, be: float):
    k = np.arange(n, dtype=float)
    s = 2 * k + al + be
    with np.errstate(divide="ignore", invalid="ignore"):
        a = (be ** 2 - al ** 2) / (s * (s + 2))
    a[0] = (be - al) / (al + be + 2)
    kp = k + 1
    with np.errstate(divide="ignore", invalid="ignore"):
        b2 = 4 * kp * (kp + al) * (kp + be) * (kp + al + be) / ((s + 2) ** 2 * (s + 3) * (s + 1))
    b2[0] = 4 * (1 + al) * (1 + be) / ((2 + al + be) ** 2 * (3 + al + be))
    return a, np.sqrt(b2)


def _stieltjes(x: np.ndarray, w: np.ndarray, n: int):
    """Recurrence coefficients of a discrete measure by the Stieltjes procedure."""
    mass = w.sum()
    if not mass > 0:
        raise DegenerateMeasureError("density has no mass on the interval")
    w = w / mass
    a = np.zeros(n)
    b = np.zeros(n)
    q_prev = np.zeros_like(x)
    q = np.ones_like(x)
    for k in range(n):
        a[k] = np.sum(w * x * q * q)
        r = (x - a[k]) * q - (b[k - 1] * q_prev if k > 0 else 0.0)
        b[k] = np.sqrt(np.sum(w * r * r))
        if not b[k] > 1e-14:
            raise DegenerateMeasureError(f"Stieltjes procedure broke down at degree {k + 1}")
        q_prev, q = q, r / b[k]
    return a, b


def recurrence_coefficients(measure1d: Univariate, n: int) -> Recurrence:
    """Orthonormal recurrence (probability normalisation) with ``n`` coefficient pairs."""
    if n < 1:
        raise ValueError("need at least one coefficient")
    fam = measure1d.family
    if fam == "gaussian":
        mean, std = measure1d.lo, measure1d.hi
        return Recurrence(np.full(n, mean), std * np.sqrt(np.arange(1, n + 1.0)))
    if fam == "density":
        xr, wr = np.polynomial.legendre.leggauss(500)
        h = 0.5 * (measure1d.hi - measure1d.lo)
        c = 0.5 * (measure1d.hi + measure1d.lo)
        x = c + h * xr
        w = wr * np.asarray(measure1d.weight(x), dtype=float)
        a, b = _stieltjes(x, w, n)
        return Recurrence(a, b)
    if fam == "uniform":
        k = np.arange(n, dtype=float)
        a, b = np.zeros(n), (k + 1) / np.sqrt((2 * k + 1) * (2 * k + 3))
    else:
        a, b = _jacobi_ab(n, measure1d.alpha, measure1d.beta)
    h = 0.5 * (measure1d.hi - measure1d.lo)
    c = 0.5 * (measure1d.hi + measure1d.lo)
    return Recurrence(c + h * a, h * b)


@dataclass(frozen=True)
class UnivariateRule:
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def gauss_rule(rec: Recurrence, M: int) -> UnivariateRule:
    """Gauss rule from the eigen-decomposition of the Jacobi matrix (Golub-Welsch)."""
    if not rec.orthonormal:
        raise ValueError("Gauss rules need an orthonormal recurrence")
    if not 1 <= M <= rec.n:
        raise ValueError(f"M must be in [1, {rec.n}]")
    if M == 1:
        return UnivariateRule(np.array([rec.a[0]]), np.array([rec.mass]))
    nodes, vecs = eigh_tridiagonal(rec.a[:M], rec.b[:M - 1])
    return UnivariateRule(nodes, rec.mass * vecs[0] ** 2)


def radau_family_rule(rec: Recurrence, M: int, c: float) -> UnivariateRule:
    """Rule on the zeros of ``q_M - c q_{M-1}`` with Christoffel weights.

    Exact to degree ``2M - 2``; ``c = 0`` gives the Gauss rule.
    """
    if not rec.orthonormal:
        raise ValueError("need an orthonormal recurrence")
    if not 1 <= M <= rec.n:
        raise ValueError(f"M must be in [1, {rec.n}]")
    diag = rec.a[:M].copy()
    diag[M - 1] += c * rec.b[M - 1]
    if M == 1:
        nodes = diag
    else:
        nodes = eigh_tridiagonal(diag, rec.b[:M - 1], eigvals_only=True)
    q = evaluate_1d(rec, nodes, M - 1)
    return UnivariateRule(nodes, 1.0 / np.sum(q * q, axis=1))


def evaluate_1d(rec: Recurrence, t, deg: int) -> np.ndarray:
    """Table ``Q[s, k] = q_k(t_s)`` for ``k = 0..deg``."""
    t = np.asarray(t, dtype=float)
    if deg > rec.n:
        raise ValueError(f"degree {deg} exceeds recurrence length {rec.n}")
    out = np.empty(t.shape + (deg + 1,))
    out[..., 0] = 1.0 / np.sqrt(rec.mass)
    if deg >= 1:
        out[..., 1] = (t - rec.a[0]) * out[..., 0] / rec.b[0]
    for k in range(1, deg):
        out[..., k + 1] = ((t - rec.a[k]) * out[..., k] - rec.c(k) * out[..., k - 1]) / rec.b[k]
    return out


def derivative_1d(rec: Recurrence, t, deg: int, values: np.ndarray | None = None) -> np.ndarray:
    """Table of ``q_k'(t_s)`` from the differentiated recurrence."""
    t = np.asarray(t, dtype=float)
    if values is None:
        values = evaluate_1d(rec, t, deg)
    out = np.zeros(t.shape + (deg + 1,))
    if deg >= 1:
        out[..., 1] = values[..., 0] / rec.b[0]
    for k in range(1, deg):
        out[..., k + 1] = ((t - rec.a[k]) * out[..., k] + values[..., k]
                           - rec.c(k) * out[..., k - 1]) / rec.b[k]
    return out


class TensorBasis:
    """Basis ``p_alpha(x) = prod_j q_{alpha_j, j}(x_j)`` of ``P_Lambda``.

    An optional ``transform`` (N x N) replaces the basis by ``V @ transform``,
    which spans the same space; it is used for conditioning non-tensor measures.
    """

    def __init__(self, index_set: MultiIndexSet, recs: Sequence[Recurrence], transform=None):
        if len(recs) != index_set.dim:
            raise ValueError("need one recurrence per coordinate")
        degs = index_set.max_degrees
        for j, rec in enumerate(recs):
            if degs[j] > rec.n:
                raise ValueError(f"coordinate {j} needs degree {degs[j]} but recurrence has {rec.n}")
        self.index_set = index_set
        self.recs = list(recs)
        self.transform = None if transform is None else np.asarray(transform, dtype=float)
        self._alpha = index_set.array
        self._degs = degs

    @property
    def dim(self) -> int:
        return self.index_set.dim

    def __len__(self) -> int:
        return len(self.index_set)

    def _tables(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.dim:
            raise ValueError(f"points must have {self.dim} columns")
        return points, [evaluate_1d(r, points[:, j], int(self._degs[j])) for j, r in enumerate(self.recs)]

    def _apply(self, v):
        return v if self.transform is None else v @ self.transform

    def evaluate(self, points) -> np.ndarray:
        """Matrix ``V[s, i] = p_i(x_s)``."""
        points, tabs = self._tables(points)
        v = np.ones((len(points), len(self)))
        for j, tab in enumerate(tabs):
            v *= tab[:, self._alpha[:, j]]
        return self._apply(v)

    def partial(self, points, coord: int) -> np.ndarray:
        points, tabs = self._tables(points)
        v = np.ones((len(points), len(self)))
        for j, tab in enumerate(tabs):
            if j == coord:
                dtab = derivative_1d(self.recs[j], points[:, j], int(self._degs[j]), tab)
                v *= dtab[:, self._alpha[:, j]]
            else:
                v *= tab[:, self._alpha[:, j]]
        return self._apply(v)

    def evaluate_with_gradient(self, points):
        """Values (S x N) and all partials (d x S x N) sharing the 1-d tables."""
        points, tabs = self._tables(points)
        cols = [tab[:, self._alpha[:, j]] for j, tab in enumerate(tabs)]
        dcols = [derivative_1d(self.recs[j], points[:, j], int(self._degs[j]), tab)[:, self._alpha[:, j]]
                 for j, tab in enumerate(tabs)]
        d = self.dim
        # prefix/suffix products avoid dividing by vanishing factors
        prefix = [np.ones_like(cols[0])]
        for j in range(d - 1):
            prefix.append(prefix[-1] * cols[j])
        suffix = [np.ones_like(cols[0])] * d
        acc = np.ones_like(cols[0])
        for j in range(d - 1, -1, -1):
            suffix[j] = acc
            acc = acc * cols[j]
        values = self._apply(acc)
        grads = np.stack([self._apply(prefix[j] * dcols[j] * suffix[j]) for j in range(d)])
        return values, grads


def evaluate_basis(index_set: MultiIndexSet, recs: Sequence[Recurrence], points) -> np.ndarray:
    return TensorBasis(index_set, recs).evaluate(points)


def basis_partial_derivative(index_set: MultiIndexSet, recs: Sequence[Recurrence], points, coord: int) -> np.ndarray:
    return TensorBasis(index_set, recs).partial(points, coord)


def christoffel_lambda(theta: MultiIndexSet, recs: Sequence[Recurrence], x) -> np.ndarray | float:
    """``1 / sum_{alpha in Theta} q_alpha(x)^2`` for an orthonormal tensor basis."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    v = evaluate_basis(theta, recs, np.atleast_2d(x))
    lam = 1.0 / np.sum(v * v, axis=1)
    return float(lam[0]) if single else lam
