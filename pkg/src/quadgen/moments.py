"""Moment vectors: analytic, quadrature-based, sampled and ridge-projected."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve

from .domains import (Box, DensityMeasure, EmpiricalMeasure, Measure, RidgeMeasure,
                      TensorMeasure, Zonotope)
from .indexset import MultiIndexSet
from .orthopoly import (Recurrence, TensorBasis, Univariate, evaluate_1d, gauss_rule,
                        recurrence_coefficients, uniform)

log = logging.getLogger(__name__)

MOMENTS_SCHEMA = "quadgen.moments/1"


class ExpansionTooLargeError(ValueError):
    pass


@dataclass
class MomentProblem:
    """Target moments ``m_i = int p_i dmu`` for the basis of ``P_Lambda``."""

    index_set: MultiIndexSet
    basis: TensorBasis
    moments: np.ndarray
    domain: Box | Zonotope
    measure: Measure | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.moments = np.asarray(self.moments, dtype=float)
        if self.moments.shape != (len(self.index_set),):
            raise ValueError("moment vector length must equal |Lambda|")

    @property
    def dim(self) -> int:
        return self.index_set.dim

    @property
    def size(self) -> int:
        return len(self.index_set)

    def residual(self, nodes, weights) -> np.ndarray:
        """``m - sum_m w_m p(x_m)``."""
        return self.moments - np.asarray(weights) @ self.basis.evaluate(nodes)

    def to_json(self) -> str:
        return json.dumps({
            "schema": MOMENTS_SCHEMA,
            "dim": self.dim,
            "index_set": [list(a) for a in self.index_set],
            "moments": self.moments.tolist(),
            "info": self.info,
        }, indent=1)


def univariate_integrals(factor: Univariate, rec: Recurrence, deg: int) -> np.ndarray:
    """``int q_k dmu`` for ``k = 0..deg`` using a Gauss rule of the factor measure."""
    own = recurrence_coefficients(factor, deg // 2 + 2)
    rule = gauss_rule(own, deg // 2 + 1)
    return rule.weights @ evaluate_1d(rec, rule.nodes, deg)


def tensor_moments(measure: TensorMeasure, basis: TensorBasis) -> np.ndarray:
    alpha = basis.index_set.array
    m = np.ones(len(basis.index_set))
    for j, (factor, rec) in enumerate(zip(measure.factors, basis.recs)):
        ints = univariate_integrals(factor, rec, int(alpha[:, j].max()))
        m *= ints[alpha[:, j]]
    return m if basis.transform is None else m @ basis.transform


def sample_moments(samples, basis: TensorBasis) -> np.ndarray:
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if len(samples) < 1:
        raise ValueError("need at least one sample")
    return basis.evaluate(samples).mean(axis=0)


def density_moments(measure: DensityMeasure, basis: TensorBasis, n: int | None = None) -> np.ndarray:
    nodes, weights = measure.reference_rule(n)
    return weights @ basis.evaluate(nodes)


def _univariate_monomial_moments(factor: Univariate, deg: int) -> np.ndarray:
    own = recurrence_coefficients(factor, deg // 2 + 2)
    rule = gauss_rule(own, deg // 2 + 1)
    return np.array([rule.weights @ rule.nodes ** k for k in range(deg + 1)])


def ridge_monomial_moments(A, base: TensorMeasure, max_degree: int) -> np.ndarray:
    """All monomial moments ``E[(A y)^alpha]``, ``|alpha| <= max_degree``, as a dense array.

    Expanding each ``(a_j^T y)^{alpha_j}`` multinomially and integrating
    coordinate by coordinate, the moment equals ``alpha!`` times the
    ``t^alpha`` coefficient of ``prod_k sum_m nu_k(|m|) prod_j A_jk^{m_j} / m_j!``,
    where ``nu_k(n)`` are the univariate moments of the base factors.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    s, d = A.shape
    D = int(max_degree)
    shape = (D + 1,) * s
    grid = np.indices(shape).reshape(s, -1).T
    total = grid.sum(axis=1)
    valid = total <= D
    inv_fact = np.array([1.0 / math.factorial(k) for k in range(D + 1)])
    acc = np.zeros(shape)
    acc[(0,) * s] = 1.0
    for k in range(d):
        nu = _univariate_monomial_moments(base.factors[k], D)
        coef = np.where(valid, nu[np.minimum(total, D)], 0.0)
        for j in range(s):
            coef = coef * A[j, k] ** grid[:, j] * inv_fact[grid[:, j]]
        acc = convolve(acc, coef.reshape(shape), method="direct")[tuple(slice(0, D + 1) for _ in range(s))]
        acc.reshape(-1)[~valid] = 0.0
    fact = np.array([math.factorial(k) for k in range(D + 1)], dtype=float)
    return acc * np.prod([fact[grid[:, j]] for j in range(s)], axis=0).reshape(shape)


def ridge_moments(A, base: TensorMeasure, index_set: MultiIndexSet, max_degree: int = 20) -> np.ndarray:
    """Monomial moments ``int x^alpha dmu`` of the projected measure ``x = A y``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if index_set.dim != A.shape[0]:
        raise ValueError("index set dimension must equal the number of rows of A")
    D = index_set.max_total_degree
    if D > max_degree:
        raise ExpansionTooLargeError(f"total degree {D} exceeds the expansion guard {max_degree}")
    table = ridge_monomial_moments(A, base, D)
    return np.array([table[alpha] for alpha in index_set])


def monomial_coefficients(rec: Recurrence, deg: int) -> np.ndarray:
    """``C[k, n]`` with ``q_k(t) = sum_n C[k, n] t^n``."""
    C = np.zeros((deg + 1, deg + 1))
    C[0, 0] = 1.0 / math.sqrt(rec.mass)
    if deg >= 1:
        C[1, 1] = C[0, 0] / rec.b[0]
        C[1, 0] = -rec.a[0] * C[0, 0] / rec.b[0]
    for k in range(1, deg):
        shifted = np.concatenate([[0.0], C[k, :-1]])
        C[k + 1] = (shifted - rec.a[k] * C[k] - rec.c(k) * C[k - 1]) / rec.b[k]
    return C


def ridge_basis_moments(measure: RidgeMeasure, basis: TensorBasis, max_degree: int = 20) -> np.ndarray:
    """Moments of a tensor basis under a ridge measure, via monomial moments.

    The basis is rewritten in the scaled monomials ``(x_j / h_j)^n`` (``h``
    the half-width of the bounding box) before contracting with the
    ridge moments, which keeps the change of basis well scaled.
    """
    lam = basis.index_set
    D = lam.max_total_degree
    if D > max_degree:
        raise ExpansionTooLargeError(f"total degree {D} exceeds the expansion guard {max_degree}")
    half = measure.domain.bounding_box.upper
    table = ridge_monomial_moments(measure.A / half[:, None], measure.base, D)
    degs = lam.max_degrees
    coeffs = []
    for j, rec in enumerate(basis.recs):
        C = monomial_coefficients(rec, int(degs[j]))
        coeffs.append(C * half[j] ** np.arange(int(degs[j]) + 1))
    m = np.empty(len(lam))
    for i, alpha in enumerate(lam):
        sub = table[tuple(slice(0, a + 1) for a in alpha)]
        for j, a in enumerate(alpha):
            sub = np.tensordot(coeffs[j][a, :a + 1], sub, axes=([0], [0]))
        m[i] = sub
    return m if basis.transform is None else m @ basis.transform


def box_basis(box: Box, index_set: MultiIndexSet) -> TensorBasis:
    """Tensor Legendre basis orthonormal for the uniform measure on ``box``."""
    degs = index_set.max_degrees
    recs = [recurrence_coefficients(uniform(lo, hi), max(int(k), 1))
            for lo, hi, k in zip(box.lower, box.upper, degs)]
    return TensorBasis(index_set, recs)


def orthonormal_basis(measure: TensorMeasure, index_set: MultiIndexSet) -> TensorBasis:
    degs = index_set.max_degrees
    recs = [recurrence_coefficients(f, max(int(k), 1)) for f, k in zip(measure.factors, degs)]
    return TensorBasis(index_set, recs)


def gram_conditioning_basis(measure: Measure, index_set: MultiIndexSet, seed=0,
                            n_samples: int = 100_000, samples=None, max_cond: float = 1e12):
    """Basis orthonormalised against samples of a non-tensor measure.

    Returns ``(basis, info)``; ``info["fallback"]`` is True when the sample
    Gram matrix was numerically singular and the bounding-box basis is used.
    """
    if isinstance(measure, TensorMeasure):
        return orthonormal_basis(measure, index_set), {"basis": "tensor-orthonormal", "fallback": False}
    base = box_basis(measure.domain.bounding_box, index_set)
    if samples is None:
        samples = measure.samples if isinstance(measure, EmpiricalMeasure) else measure.sample(n_samples, seed)
    info = {"basis": "bounding-box-legendre", "fallback": True}
    if len(samples) < len(index_set):
        return base, info
    V = base.evaluate(samples)
    G = V.T @ V / len(samples)
    try:
        if np.linalg.cond(G) > max_cond:
            raise np.linalg.LinAlgError("ill-conditioned Gram matrix")
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        log.info("sample Gram matrix singular; falling back to bounding-box basis")
        return base, info
    T = np.linalg.solve(L, np.eye(len(G))).T
    return TensorBasis(index_set, base.recs, T), {"basis": "gram-conditioned-legendre", "fallback": False}


def build_problem(measure: Measure, index_set: MultiIndexSet, moments: str = "auto",
                  n_samples: int | None = None, seed=0, samples=None) -> MomentProblem:
    """Assemble a moment problem with the default basis for each kind of measure.

    ``moments="samples"`` replaces exact moments by averages over
    ``n_samples`` draws (or the given ``samples``).
    """
    if isinstance(measure, TensorMeasure):
        basis = orthonormal_basis(measure, index_set)
        kind = "tensor-orthonormal"
    else:
        basis = box_basis(measure.domain.bounding_box, index_set)
        kind = "bounding-box-legendre"
    info = {"basis": kind, "measure": measure.describe()}
    if moments == "samples" or (moments == "auto" and isinstance(measure, EmpiricalMeasure)):
        if samples is None:
            samples = measure.samples if isinstance(measure, EmpiricalMeasure) else \
                measure.sample(int(n_samples or 10_000), seed)
        m = sample_moments(samples, basis)
        info["moments"] = {"method": "samples", "n": len(samples)}
    elif isinstance(measure, TensorMeasure):
        m = tensor_moments(measure, basis)
        info["moments"] = {"method": "analytic"}
    elif isinstance(measure, DensityMeasure):
        m = density_moments(measure, basis)
        info["moments"] = {"method": "tensor-gauss-legendre", "n": measure.quad_points}
    elif isinstance(measure, RidgeMeasure):
        m = ridge_basis_moments(measure, basis)
        info["moments"] = {"method": "ridge-multinomial"}
    else:
        raise TypeError(f"no moment method for {type(measure).__name__}")
    return MomentProblem(index_set, basis, m, measure.domain, measure, info)
