"""Integration domains, probability measures and samplers."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .orthopoly import Univariate, uniform

log = logging.getLogger(__name__)

CONTAINS_TOL = 1e-12


class RejectionSamplingError(RuntimeError):
    pass


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise ValueError("lower and upper must have the same length")
        if np.any(hi <= lo):
            raise ValueError("box needs lower < upper in every coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, d: int, lo: float = -1.0, hi: float = 1.0) -> "Box":
        return cls(np.full(d, lo), np.full(d, hi))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def bounding_box(self) -> "Box":
        return self

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def contains(self, x, tol: float = CONTAINS_TOL):
        x = np.asarray(x, dtype=float)
        inside = np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)
        return bool(inside) if x.ndim == 1 else inside

    def uniform_points(self, n: int, rng) -> np.ndarray:
        return self.lower + (self.upper - self.lower) * _rng(rng).random((n, self.dim))

    def to_dict(self) -> dict:
        return {"type": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True)
class Zonotope:
    """Image ``{A y : y in [-1,1]^d}`` described by its (approximate) hull.

    ``normals @ x <= offsets`` are the hull facets, ``vertices`` the extreme
    points that were found.
    """

    generators: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray
    vertices: np.ndarray

    @property
    def dim(self) -> int:
        return self.generators.shape[0]

    @property
    def bounding_box(self) -> Box:
        # support function of the zonotope in +-e_i directions
        half = np.abs(self.generators).sum(axis=1)
        return Box(-half, half)

    def contains(self, x, tol: float = CONTAINS_TOL):
        x = np.asarray(x, dtype=float)
        viol = x @ self.normals.T - self.offsets
        inside = np.all(viol <= tol * np.maximum(1.0, np.abs(self.offsets)), axis=-1)
        return bool(inside) if x.ndim == 1 else inside

    def uniform_points(self, n: int, rng, max_batches: int = 1000) -> np.ndarray:
        rng = _rng(rng)
        box = self.bounding_box
        out, have = [], 0
        for _ in range(max_batches):
            cand = box.uniform_points(max(2 * (n - have), 64), rng)
            keep = cand[self.contains(cand)]
            out.append(keep)
            have += len(keep)
            if have >= n:
                return np.concatenate(out)[:n]
        raise RejectionSamplingError("zonotope rejection sampling failed; is the hull degenerate?")

    def to_dict(self) -> dict:
        return {"type": "zonotope", "generators": self.generators.tolist()}


Domain = Box | Zonotope


def contains(domain: Domain, x, tol: float = CONTAINS_TOL):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != domain.dim:
        raise ValueError(f"point dimension {x.shape[-1]} != domain dimension {domain.dim}")
    return domain.contains(x, tol)


@dataclass(frozen=True)
class AffineMap:
    """``x -> shift + scale * x`` between two boxes (diagonal Jacobian)."""

    scale: np.ndarray
    shift: np.ndarray

    def __call__(self, x):
        return self.shift + self.scale * np.asarray(x, dtype=float)

    def inverse(self, y):
        return (np.asarray(y, dtype=float) - self.shift) / self.scale

    @property
    def jacobian_det(self) -> float:
        return float(np.prod(self.scale))


def affine_map_box(source: Box, target: Box) -> AffineMap:
    if source.dim != target.dim:
        raise ValueError("boxes must have the same dimension")
    scale = (target.upper - target.lower) / (source.upper - source.lower)
    shift = target.lower - scale * source.lower
    return AffineMap(scale, shift)


def _polygon_hull(points: np.ndarray) -> np.ndarray:
    """Counter-clockwise convex polygon through the extreme points (angular sort)."""
    ang = np.arctan2(points[:, 1], points[:, 0])
    pts = points[np.lexsort((np.hypot(points[:, 0], points[:, 1]), ang))]
    hull: list[np.ndarray] = []
    # drop points that fail the left-turn test after sorting around the centre
    for p in np.concatenate([pts, pts[:2]]):
        while len(hull) >= 2:
            e1 = hull[-1] - hull[-2]
            e2 = p - hull[-1]
            if e1[0] * e2[1] - e1[1] * e2[0] > 1e-12 * (np.abs(e1).sum() * np.abs(e2).sum()):
                break
            hull.pop()
        hull.append(p)
    hull = np.array(hull[:-2]) if len(hull) > 2 else np.array(hull)
    # the wrap-around may duplicate the first vertex
    keep = [0] + [i for i in range(1, len(hull)) if np.linalg.norm(hull[i] - hull[0]) > 1e-12]
    return hull[keep]


def _hull_halfspaces(vertices: np.ndarray):
    s = vertices.shape[1]
    if s == 1:
        v = float(np.max(np.abs(vertices)))
        return np.array([[1.0], [-1.0]]), np.array([v, v]), np.array([[-v], [v]])
    if s == 2:
        poly = _polygon_hull(vertices)
        edges = np.roll(poly, -1, axis=0) - poly
        normals = np.column_stack([edges[:, 1], -edges[:, 0]])
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        return normals, np.einsum("ij,ij->i", normals, poly), poly
    from scipy.spatial import ConvexHull

    hull = ConvexHull(vertices)
    eq = hull.equations
    return eq[:, :-1], -eq[:, -1], vertices[hull.vertices]


def zonotope_build(A, n_probe: int | None = None, seed=0, max_refine: int = 50) -> Zonotope:
    """Hull of ``A [-1,1]^d`` from randomised vertex probes.

    Each probe direction ``g`` yields the vertex ``A sign(A^T g)``.  After the
    random phase every facet normal is probed as well; vertices beyond their
    facet are added until no facet is violated (exact for ``s = 2``).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    s, d = A.shape
    if s > d:
        raise ValueError("projection must not increase the dimension (s <= d)")
    if np.linalg.matrix_rank(A) < s:
        raise np.linalg.LinAlgError("projection matrix is rank deficient")
    rng = _rng(seed)
    if n_probe is None:
        n_probe = 10 * 2 ** s * d
    g = rng.standard_normal((n_probe, s))
    verts = np.sign(g @ A) @ A.T
    verts = np.unique(np.round(np.vstack([verts, -verts]), 13), axis=0)
    normals, offsets, hull_verts = _hull_halfspaces(verts)
    for _ in range(max_refine):
        probe = np.sign(normals @ A) @ A.T
        excess = np.einsum("ij,ij->i", probe, normals) - offsets
        bad = excess > 1e-12 * np.maximum(1.0, np.abs(offsets))
        if not bad.any():
            break
        new = probe[bad]
        verts = np.unique(np.round(np.vstack([hull_verts, new, -new]), 13), axis=0)
        normals, offsets, hull_verts = _hull_halfspaces(verts)
    return Zonotope(A, normals, offsets, hull_verts)


class Measure:
    """Base class: a probability measure with a bounded support domain."""

    dim: int
    domain: Domain

    def sample(self, n: int, seed=None) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


def _sample_univariate(u: Univariate, n: int, rng) -> np.ndarray:
    if u.family == "uniform":
        return rng.uniform(u.lo, u.hi, n)
    if u.family == "jacobi":
        s = rng.beta(u.beta + 1.0, u.alpha + 1.0, n)
        return u.lo + (u.hi - u.lo) * s
    if u.family == "gaussian":
        return rng.normal(u.lo, u.hi, n)
    return _rejection(lambda x: np.asarray(u.weight(x[:, 0])), Box([u.lo], [u.hi]), n, rng)[:, 0]


@dataclass(frozen=True)
class TensorMeasure(Measure):
    factors: tuple[Univariate, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))

    @classmethod
    def uniform_cube(cls, d: int, lo: float = -1.0, hi: float = 1.0) -> "TensorMeasure":
        return cls(tuple(uniform(lo, hi) for _ in range(d)))

    @property
    def dim(self) -> int:
        return len(self.factors)

    @property
    def domain(self) -> Box:
        lo = [f.lo if f.bounded else -np.inf for f in self.factors]
        hi = [f.hi if f.bounded else np.inf for f in self.factors]
        if not all(f.bounded for f in self.factors):
            return _UnboundedBox(np.array(lo), np.array(hi))
        return Box(lo, hi)

    def sample(self, n, seed=None):
        rng = _rng(seed)
        return np.column_stack([_sample_univariate(f, n, rng) for f in self.factors])

    def describe(self):
        return {"type": "tensor", "factors": [
            {"family": f.family, "interval": [f.lo, f.hi], "alpha": f.alpha, "beta": f.beta}
            for f in self.factors]}


class _UnboundedBox(Box):
    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))


def _sup_bound(fn, box: Box, safety: float = 1.5) -> float:
    d = box.dim
    if d <= 3:
        axes = [np.linspace(lo, hi, 201 if d <= 2 else 61) for lo, hi in zip(box.lower, box.upper)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    else:
        grid = box.uniform_points(200_000, np.random.default_rng(12345))
    return safety * float(np.max(fn(grid)))


def _rejection(fn, box: Box, n: int, rng, bound: float | None = None,
               min_rate: float = 1e-4, batch: int = 200_000) -> np.ndarray:
    if bound is None:
        bound = _sup_bound(fn, box)
    out, have, tried, accepted = [], 0, 0, 0
    while have < n:
        cand = box.uniform_points(batch, rng)
        u = rng.random(batch) * bound
        vals = fn(cand)
        if np.any(vals > bound):
            log.warning("density exceeded its rejection bound; samples may be biased")
        keep = cand[u < vals]
        tried += batch
        accepted += len(keep)
        out.append(keep)
        have += len(keep)
        if tried >= 10 * batch and accepted / tried < min_rate:
            raise RejectionSamplingError(
                f"acceptance rate {accepted / tried:.2e} below {min_rate:.0e} "
                f"after {tried} proposals (bound {bound:.3e})")
    return np.concatenate(out)[:n]


def tensor_gauss_legendre(box: Box, n: int):
    """Tensor Gauss-Legendre nodes and weights (summing to the box volume)."""
    t, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (box.upper - box.lower)
    mid = 0.5 * (box.upper + box.lower)
    axes = [mid[j] + half[j] * t for j in range(box.dim)]
    wts = [half[j] * w for j in range(box.dim)]
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.dim)
    weights = wts[0]
    for wj in wts[1:]:
        weights = np.multiply.outer(weights, wj)
    return nodes, np.asarray(weights).ravel()


@dataclass(frozen=True)
class DensityMeasure(Measure):
    """Measure ``C * rho(x) dx`` on a box; ``C`` from a dense tensor Gauss-Legendre rule."""

    rho: Callable[[np.ndarray], np.ndarray]
    box: Box
    name: str = "density"
    params: dict = field(default_factory=dict)
    quad_points: int = 200
    normalization: float = field(init=False)

    def __post_init__(self):
        nodes, weights = tensor_gauss_legendre(self.box, self.quad_points)
        total = float(weights @ self.rho(nodes))
        if not total > 0:
            raise ValueError("density must have positive mass on its box")
        object.__setattr__(self, "normalization", 1.0 / total)

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def domain(self) -> Box:
        return self.box

    def pdf(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.normalization * self.rho(x) * self.box.contains(x)

    def reference_rule(self, n: int | None = None):
        """Dense tensor Gauss-Legendre rule for this measure (weights sum to 1)."""
        nodes, weights = tensor_gauss_legendre(self.box, n or self.quad_points)
        return nodes, weights * self.normalization * self.rho(nodes)

    def sample(self, n, seed=None):
        return _rejection(self.rho, self.box, n, _rng(seed))

    def describe(self):
        return {"type": "density", "name": self.name, **self.params,
                "box": [self.box.lower.tolist(), self.box.upper.tolist()]}


BANANA_BOX = Box([-3.0, -2.0], [3.0, 6.0])
DOMAIN_I = Box([0.0, 5.0], [4.5, 35.0])
DOMAIN_II = Box([1.28, 16.6], [1.92, 24.9])


def banana_rho(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    x1, x2 = x[:, 0], x[:, 1]
    return np.exp(-(x1 ** 4 / 10.0 + 0.5 * (2.0 * x2 - x1 ** 2) ** 2))


def banana(target: Box | None = None) -> DensityMeasure:
    """Banana density on ``[-3,3] x [-2,6]``, optionally pushed affinely onto ``target``."""
    if target is None:
        return DensityMeasure(banana_rho, BANANA_BOX, "banana")
    amap = affine_map_box(BANANA_BOX, target)

    def rho(y):
        return banana_rho(amap.inverse(np.atleast_2d(y)))

    return DensityMeasure(rho, target, "banana",
                          {"target": [target.lower.tolist(), target.upper.tolist()]})


@dataclass(frozen=True)
class EmpiricalMeasure(Measure):
    """Equal-weight sample cloud; the domain defaults to its bounding box."""

    samples: np.ndarray
    box: Box | None = None
    source: str | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.samples, dtype=float))
        object.__setattr__(self, "samples", pts)
        if self.box is None:
            lo, hi = pts.min(axis=0), pts.max(axis=0)
            pad = 1e-9 * np.maximum(1.0, hi - lo)
            object.__setattr__(self, "box", Box(lo - pad, hi + pad))
        elif not np.all(self.box.contains(pts)):
            raise ValueError("empirical samples must lie inside the domain")

    @classmethod
    def from_csv(cls, path, box: Box | None = None) -> "EmpiricalMeasure":
        data = np.loadtxt(path, delimiter=",", ndmin=2)
        return cls(data, box, str(path))

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def domain(self) -> Box:
        return self.box

    def sample(self, n, seed=None):
        rng = _rng(seed)
        return self.samples[rng.integers(0, len(self.samples), n)]

    def describe(self):
        return {"type": "empirical", "csv": self.source, "size": len(self.samples),
                "box": [self.box.lower.tolist(), self.box.upper.tolist()]}


@dataclass(frozen=True)
class RidgeMeasure(Measure):
    """Push-forward of a tensor measure on ``[-1,1]^d`` under ``x = A y``."""

    base: TensorMeasure
    A: np.ndarray
    zonotope: Zonotope
    orthonormal: bool = False

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        object.__setattr__(self, "A", A)
        if A.shape[1] != self.base.dim:
            raise ValueError("A must have as many columns as the base measure dimension")
        if self.orthonormal and not np.allclose(A @ A.T, np.eye(A.shape[0]), atol=1e-12):
            raise ValueError("A is flagged orthonormal but A A^T != I")

    @classmethod
    def build(cls, A, base: TensorMeasure | None = None, n_probe=None, seed=0) -> "RidgeMeasure":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        base = base or TensorMeasure.uniform_cube(A.shape[1])
        ortho = bool(np.allclose(A @ A.T, np.eye(A.shape[0]), atol=1e-12))
        return cls(base, A, zonotope_build(A, n_probe, seed), ortho)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def domain(self) -> Zonotope:
        return self.zonotope

    def sample(self, n, seed=None):
        return self.base.sample(n, seed) @ self.A.T

    def describe(self):
        return {"type": "ridge", "A": self.A.tolist(), "base": self.base.describe()}


def random_orthonormal_rows(s: int, d: int, seed=0) -> np.ndarray:
    """``s x d`` matrix with orthonormal rows (QR of a Gaussian matrix)."""
    g = _rng(seed).standard_normal((d, s))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))
    return q.T.copy()


def sample(measure: Measure, n: int, seed=None) -> np.ndarray:
    return measure.sample(n, seed)
