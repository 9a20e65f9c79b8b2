"""Multi-index sets, their algebra, and maximal half-sets.

A multi-index set ``Lambda`` defines the polynomial space whose moments a
quadrature rule has to reproduce.  The maximal half-set size ``L(Lambda)``
(the largest ``Theta`` with ``Theta + Theta`` inside ``Lambda``) is a lower
bound on the number of nodes of any exact rule.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

MultiIndex = tuple[int, ...]


INDEXSET_SCHEMA = "quadgen.indexset/1"


class UnboundedIndexSetError(ValueError):
    """Raised when the requested ball is an infinite set."""


class NotDownwardClosedError(ValueError):
    pass


@dataclass(frozen=True)
class MultiIndexSet:
    """Finite set of ``dim``-dimensional multi-indices in lexicographic order."""

    dim: int
    indices: tuple[MultiIndex, ...]
    _lookup: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        canon = tuple(sorted({tuple(int(a) for a in alpha) for alpha in self.indices}))
        if not canon:
            raise ValueError("multi-index set must be nonempty")
        for alpha in canon:
            if len(alpha) != self.dim:
                raise ValueError(f"index {alpha} does not have dimension {self.dim}")
            if min(alpha) < 0:
                raise ValueError(f"index {alpha} has a negative coordinate")
        object.__setattr__(self, "indices", canon)
        object.__setattr__(self, "_lookup", {alpha: i for i, alpha in enumerate(canon)})

    @classmethod
    def from_iterable(cls, indices: Iterable[Sequence[int]], dim: int | None = None) -> "MultiIndexSet":
        indices = [tuple(int(a) for a in alpha) for alpha in indices]
        if dim is None:
            if not indices:
                raise ValueError("cannot infer dimension of an empty set")
            dim = len(indices[0])
        return cls(dim, tuple(indices))

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, alpha) -> bool:
        return tuple(alpha) in self._lookup

    def position(self, alpha) -> int:
        return self._lookup[tuple(alpha)]

    @property
    def array(self) -> np.ndarray:
        return np.array(self.indices, dtype=np.int64).reshape(len(self), self.dim)

    @property
    def max_degrees(self) -> np.ndarray:
        """Largest exponent appearing in each coordinate."""
        return self.array.max(axis=0)

    @property
    def max_total_degree(self) -> int:
        return int(self.array.sum(axis=1).max())

    def issubset(self, other: "MultiIndexSet") -> bool:
        return all(alpha in other for alpha in self.indices)

    def is_downward_closed(self) -> bool:
        for alpha in self.indices:
            for j, a in enumerate(alpha):
                if a > 0 and alpha[:j] + (a - 1,) + alpha[j + 1:] not in self._lookup:
                    return False
        return True

    def to_json(self) -> str:
        return json.dumps({"schema": INDEXSET_SCHEMA, "dim": self.dim,
                           "indices": [list(alpha) for alpha in self.indices]})

    @classmethod
    def from_json(cls, text: str) -> "MultiIndexSet":
        """Parse the schema-tagged object (a bare array of indices is also accepted)."""
        data = json.loads(text)
        dim = None
        if isinstance(data, dict):
            if data.get("schema") != INDEXSET_SCHEMA:
                raise ValueError(f"unsupported index set schema {data.get('schema')!r}")
            dim, data = data.get("dim"), data.get("indices")
        if not isinstance(data, list) or not data:
            raise ValueError("index set JSON must hold a nonempty array of integer arrays")
        return cls.from_iterable(data, dim=dim)


def _enumerate(dim, accept_prefix, accept):
    """Depth-first enumeration of multi-indices with prefix pruning."""
    out = []
    prefix = []

    def rec():
        if len(prefix) == dim:
            if accept(prefix):
                out.append(tuple(prefix))
            return
        a = 0
        while True:
            prefix.append(a)
            ok = accept_prefix(prefix)
            if ok:
                rec()
            prefix.pop()
            if not ok:
                break
            a += 1

    rec()
    return out


def ball_set(d: int, p: float, r: float, cap: int | None = None) -> MultiIndexSet:
    """Multi-indices with ``||alpha||_p <= r``, optionally intersected with ``||alpha||_1 <= cap``.

    ``p = 0`` counts nonzero entries; ``p = inf`` is the max-norm.
    """
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if not (p == 0 or p >= 1):
        raise ValueError("p must be 0 or at least 1")
    if p == 0 and r >= 1 and cap is None:
        raise UnboundedIndexSetError("B_0(r) with r >= 1 is infinite; supply a degree cap")
    cap_ok = (lambda s: True) if cap is None else (lambda s: sum(s) <= cap)
    tol = 1e-12 * max(1.0, r)

    if p == 0:
        def norm_ok(s):
            return sum(1 for a in s if a) <= r
    elif math.isinf(p):
        def norm_ok(s):
            return max(s) <= r
    elif p == 1:
        def norm_ok(s):
            return sum(s) <= r + tol
    else:
        def norm_ok(s):
            return sum(a ** p for a in s) <= r ** p * (1 + 1e-12) + tol

    def accept_prefix(s):
        return norm_ok(s) and cap_ok(s)

    return MultiIndexSet(d, tuple(_enumerate(d, accept_prefix, accept_prefix)))


def total_degree_set(d: int, k: int) -> MultiIndexSet:
    return ball_set(d, 1, k)


def anova_set(d: int, order: int, k: int) -> MultiIndexSet:
    """Indices with at most ``order`` active coordinates and total degree at most ``k``."""
    if order > d:
        raise ValueError("ANOVA order cannot exceed the dimension")
    return ball_set(d, 0, order, cap=k)


def downward_closure(lam: MultiIndexSet) -> MultiIndexSet:
    seen = set(lam.indices)
    stack = list(lam.indices)
    while stack:
        alpha = stack.pop()
        for j, a in enumerate(alpha):
            if a > 0:
                beta = alpha[:j] + (a - 1,) + alpha[j + 1:]
                if beta not in seen:
                    seen.add(beta)
                    stack.append(beta)
    return MultiIndexSet(lam.dim, tuple(seen))


def minkowski_sum(lam: MultiIndexSet, theta: MultiIndexSet) -> MultiIndexSet:
    if lam.dim != theta.dim:
        raise ValueError(f"dimension mismatch: {lam.dim} != {theta.dim}")
    a, b = lam.array, theta.array
    sums = (a[:, None, :] + b[None, :, :]).reshape(-1, lam.dim)
    return MultiIndexSet(lam.dim, tuple(map(tuple, np.unique(sums, axis=0).tolist())))


def _pair_parameters(alpha, beta):
    """Exact parameters ``p`` at which ``floor(p*alpha + (1-p)*beta)`` can change value.

    Returns the breakpoints and one interior point per open interval between them.
    """
    breaks = {Fraction(0), Fraction(1)}
    for a, b in zip(alpha, beta):
        delta = abs(a - b)
        for t in range(1, delta):
            breaks.add(Fraction(t, delta))
    breaks = sorted(breaks)
    mids = [(lo + hi) / 2 for lo, hi in zip(breaks[:-1], breaks[1:])]
    return breaks[1:-1] + mids


def is_convex(lam: MultiIndexSet) -> bool:
    """Floor-convexity: ``floor(p*alpha + (1-p)*beta)`` lies in the set for all pairs and ``p``.

    The floor of the convex combination is piecewise constant in ``p``; every
    breakpoint and one point inside every interval are checked, so the test is
    exhaustive.
    """
    idx = lam.indices
    for i, alpha in enumerate(idx):
        for beta in idx[i + 1:]:
            for p in _pair_parameters(alpha, beta):
                point = tuple(
                    (p.numerator * a + (p.denominator - p.numerator) * b) // p.denominator
                    for a, b in zip(alpha, beta)
                )
                if point not in lam:
                    return False
    return True


@dataclass(frozen=True)
class HalfSetResult:
    """Outcome of the maximal half-set search.

    ``maximal`` lists the maximal half-sets found (capped); ``exact`` is False
    when the branch-and-bound budget ran out, in which case ``size`` is only a
    lower bound on ``L``.
    """

    size: int
    theta: MultiIndexSet
    unique: bool
    maximal: tuple[MultiIndexSet, ...]
    exact: bool = True


def _encode(arr: np.ndarray, base: int) -> np.ndarray:
    weights = base ** np.arange(arr.shape[1], dtype=np.int64)
    return arr.astype(np.int64) @ weights


def _sum_membership(lam: MultiIndexSet, cand: np.ndarray) -> np.ndarray:
    """Boolean matrix ``B[i, j] = cand[i] + cand[j] in lam``."""
    lam_arr = lam.array
    base = 2 * int(lam_arr.max()) + 2
    sums = cand[:, None, :] + cand[None, :, :]
    codes = _encode(sums.reshape(-1, lam.dim), base)
    member = np.isin(codes, _encode(lam_arr, base))
    return member.reshape(len(cand), len(cand))


def _max_cliques(adj: list[int], n: int, budget: int, keep: int):
    """All maximum cliques (up to ``keep``) of a graph given as bitset adjacency.

    Branch and bound with greedy-colouring bounds; ties are explored so that
    uniqueness can be decided.  Returns (size, cliques, exhaustive).
    """
    best = [0]
    found: list[list[int]] = []
    nodes = [0]
    exhausted = [False]

    def colour_sort(pmask):
        order, bounds = [], []
        colour = 0
        uncoloured = pmask
        while uncoloured:
            colour += 1
            q = uncoloured
            while q:
                v = (q & -q).bit_length() - 1
                q &= ~(1 << v)
                q &= ~adj[v]
                uncoloured &= ~(1 << v)
                order.append(v)
                bounds.append(colour)
        return order, bounds

    def expand(clique, pmask):
        nodes[0] += 1
        if nodes[0] > budget:
            exhausted[0] = True
            return
        order, bounds = colour_sort(pmask)
        for v, bound in zip(reversed(order), reversed(bounds)):
            if len(clique) + bound < best[0]:
                return
            clique.append(v)
            new_p = pmask & adj[v]
            if new_p:
                expand(clique, new_p)
            else:
                size = len(clique)
                if size > best[0]:
                    best[0] = size
                    found.clear()
                if size == best[0] and len(found) < keep:
                    found.append(list(clique))
            clique.pop()
            pmask &= ~(1 << v)
            if exhausted[0]:
                return

    expand([], (1 << n) - 1)
    return best[0], found, not exhausted[0]


def maximal_half_set(lam: MultiIndexSet, budget: int = 200_000, keep: int = 64) -> HalfSetResult:
    """Compute ``L(Lambda)`` and the maximal half-set(s) of a downward-closed set.

    Every half-set lies inside ``{alpha : 2 alpha in Lambda}``.  When that
    candidate set is itself a half-set (always the case for convex sets) it
    is the unique maximal one.  Otherwise maximal half-sets are maximum
    cliques of the graph joining candidates whose sum stays in ``Lambda``.
    """
    if not lam.is_downward_closed():
        raise NotDownwardClosedError("maximal half-sets are defined for downward-closed sets")
    lam_arr = lam.array
    doubled = np.isin(_encode(2 * lam_arr, 2 * int(lam_arr.max()) + 2),
                      _encode(lam_arr, 2 * int(lam_arr.max()) + 2))
    cand = lam_arr[doubled]
    member = _sum_membership(lam, cand)
    if member.all():
        theta = MultiIndexSet(lam.dim, tuple(map(tuple, cand.tolist())))
        return HalfSetResult(len(theta), theta, True, (theta,))

    n = len(cand)
    # colouring bounds are tighter with high-degree vertices first
    order = np.argsort(-member.sum(axis=1), kind="stable")
    member = member[np.ix_(order, order)]
    cand = cand[order]
    adj = []
    for i in range(n):
        row = member[i].copy()
        row[i] = False
        adj.append(int("".join("1" if b else "0" for b in row[::-1]), 2) if row.any() else 0)
    size, cliques, exact = _max_cliques(adj, n, budget, keep)
    sets = tuple(MultiIndexSet(lam.dim, tuple(tuple(cand[v].tolist()) for v in c)) for c in cliques)
    sets = tuple(sorted(set(sets), key=lambda s: s.indices))
    return HalfSetResult(size, sets[0], len(sets) == 1 and exact, sets, exact)


def heuristic_size(lam: MultiIndexSet, use_lower_bound: bool = False) -> int:
    """Counting heuristic ``ceil(N / (d + 1))``, optionally raised to ``L(Lambda)``."""
    m = -(-len(lam) // (lam.dim + 1))
    if use_lower_bound:
        m = max(m, maximal_half_set(lam).size)
    return m
