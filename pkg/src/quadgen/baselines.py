"""Comparison integrators: Monte Carlo, Sobol, Clenshaw-Curtis sparse grids, Stroud rules.

All rules target the uniform probability measure on ``[-1, 1]^d`` unless
stated otherwise; weights sum to one.
"""
from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .domains import Box, Measure, TensorMeasure, sample

SOBOL_ENV = "QUADGEN_SOBOL_DIRECTIONS"
SOBOL_BITS = 32


class DirectionFileError(RuntimeError):
    pass


@dataclass
class BaselineRule:
    kind: str
    nodes: np.ndarray
    weights: np.ndarray
    param: int
    info: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.weights)

    def integrate(self, f) -> float:
        return float(self.weights @ np.asarray(f(self.nodes), dtype=float))

    def mapped(self, box: Box) -> "BaselineRule":
        """Same rule transported affinely from ``[-1, 1]^d`` onto ``box``."""
        x = box.lower + (self.nodes + 1.0) * 0.5 * (box.upper - box.lower)
        return BaselineRule(self.kind, x, self.weights.copy(), self.param, dict(self.info))


def fold_density(f, measure: Measure, box: Box | None = None):
    """``f * pdf * vol`` so that a uniform rule on ``box`` integrates ``f`` against ``measure``."""
    box = box or measure.domain.bounding_box
    vol = box.volume

    def g(x):
        return np.asarray(f(x), dtype=float) * measure.pdf(x) * vol
    return g


# ---------------------------------------------------------------- Monte Carlo

def monte_carlo(measure: Measure, n: int, seed=0) -> BaselineRule:
    """Equal-weight rule on ``n`` i.i.d. draws of ``measure``."""
    x = sample(measure, n, seed)
    return BaselineRule("mc", x, np.full(n, 1.0 / n), n, {"seed": seed})


# ---------------------------------------------------------------- Sobol

def _direction_path(path=None) -> str:
    if path:
        return str(path)
    env = os.environ.get(SOBOL_ENV)
    if env:
        return env
    return str(resources.files("quadgen") / "data" / "sobol_joe_kuo.txt")


@lru_cache(maxsize=4)
def load_directions(path: str) -> list[tuple[int, int, tuple[int, ...]]]:
    """Rows ``(s, a, m)`` of a Joe-Kuo direction-number file, from dimension 2 on."""
    rows = []
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DirectionFileError(f"cannot read Sobol direction file {path}: {exc}") from exc
    for line in lines[1:]:
        parts = line.split()
        if not parts:
            continue
        s, a = int(parts[1]), int(parts[2])
        m = tuple(int(v) for v in parts[3:3 + s])
        if len(m) != s:
            raise DirectionFileError(f"malformed row in {path}: {line!r}")
        rows.append((s, a, m))
    return rows


def _direction_vectors(d: int, path=None) -> np.ndarray:
    rows = load_directions(_direction_path(path))
    if d - 1 > len(rows):
        raise DirectionFileError(f"direction file covers {len(rows) + 1} dimensions, {d} requested")
    B = SOBOL_BITS
    V = np.zeros((d, B), dtype=np.uint64)
    V[0] = [1 << (B - 1 - k) for k in range(B)]
    for j in range(1, d):
        s, a, m = rows[j - 1]
        v = [0] * B
        for k in range(min(s, B)):
            v[k] = m[k] << (B - 1 - k)
        for k in range(s, B):
            val = v[k - s] ^ (v[k - s] >> s)
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    val ^= v[k - i]
            v[k] = val
        V[j] = v
    return V


def sobol_points(d: int, n: int, skip: int = 0, unit: bool = True, path=None) -> np.ndarray:
    """Unscrambled Sobol points ``skip .. skip+n-1`` in ``[0,1)^d`` (or ``[-1,1)^d``)."""
    V = _direction_vectors(d, path)
    idx = np.arange(skip, skip + n, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    X = np.zeros((n, d), dtype=np.uint64)
    for b in range(SOBOL_BITS):
        bit = ((gray >> np.uint64(b)) & np.uint64(1)).astype(bool)
        if bit.any():
            X[bit] ^= V[:, b]
    pts = X.astype(float) / 2.0 ** SOBOL_BITS
    return pts if unit else 2.0 * pts - 1.0


def sobol_rule(d: int, n: int, skip: int = 1, path=None) -> BaselineRule:
    """Equal-weight Sobol rule on ``[-1,1]^d``; the origin point 0 is skipped by default."""
    return BaselineRule("sobol", sobol_points(d, n, skip, unit=False, path=path), np.full(n, 1.0 / n), n,
                        {"skip": skip})


# ---------------------------------------------------------------- sparse grids

def cc_size(level: int) -> int:
    return 1 if level == 0 else 2 ** level + 1


def clenshaw_curtis(level: int):
    """Nested Clenshaw-Curtis nodes and probability weights on ``[-1, 1]``."""
    n = cc_size(level)
    if n == 1:
        return np.zeros(1), np.ones(1)
    N = n - 1
    k = np.arange(n)
    x = np.cos(k * np.pi / N)
    w = np.ones(n)
    for j in range(1, N // 2 + 1):
        b = 1.0 if 2 * j == N else 2.0
        w -= b * np.cos(2 * j * k * np.pi / N) / (4 * j * j - 1)
    c = np.full(n, 2.0)
    c[[0, -1]] = 1.0
    w *= c / N
    x[np.abs(x) < 1e-15] = 0.0
    return x[::-1].copy(), w[::-1] / 2.0


def cc_exact_degree(level: int) -> int:
    """Highest degree integrated exactly by the level-``level`` CC rule."""
    return 1 if level == 0 else cc_size(level)


def smolyak_levels(d: int, level: int):
    """Multi-levels ``i`` (``|i| <= level``) with their combination coefficients."""
    out = []
    for tot in range(max(0, level - d + 1), level + 1):
        coef = (-1) ** (level - tot) * math.comb(d - 1, level - tot)
        for i in _compositions(tot, d):
            out.append((i, coef))
    return out


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def sparse_grid(d: int, level: int) -> BaselineRule:
    """Smolyak combination of nested Clenshaw-Curtis rules (weights may be negative)."""
    if level < 0:
        raise ValueError("level must be nonnegative")
    acc: dict[tuple, float] = {}
    coords: dict[tuple, np.ndarray] = {}
    for i, coef in smolyak_levels(d, level):
        rules = [clenshaw_curtis(l) for l in i]
        for combo in itertools.product(*[range(len(r[0])) for r in rules]):
            x = np.array([rules[j][0][c] for j, c in enumerate(combo)])
            w = coef * math.prod(rules[j][1][c] for j, c in enumerate(combo))
            key = tuple(np.round(x, 14))
            acc[key] = acc.get(key, 0.0) + w
            coords[key] = x
    keys = [k for k in acc if abs(acc[k]) > 1e-15]
    keys.sort()
    nodes = np.array([coords[k] for k in keys]).reshape(-1, d)
    weights = np.array([acc[k] for k in keys])
    return BaselineRule("sparse_grid", nodes, weights, level)


# ---------------------------------------------------------------- Stroud

def stroud(d: int, degree: int) -> BaselineRule:
    """Equal-weight Stroud rules: degree 2 with ``d+1`` nodes, degree 3 with ``2d`` nodes."""
    if degree == 2:
        K, n_nodes, freq = d + 1, d + 1, lambda r: 2 * r
        ks = np.arange(n_nodes)
    elif degree == 3:
        K, n_nodes, freq = d, 2 * d, lambda r: 2 * r - 1
        ks = np.arange(1, n_nodes + 1)
    else:
        raise ValueError("only degree 2 and 3 Stroud rules are provided")
    X = np.zeros((n_nodes, d))
    c = math.sqrt(2.0 / 3.0)
    for r in range(1, d // 2 + 1):
        ang = freq(r) * ks * np.pi / K
        X[:, 2 * r - 2] = c * np.cos(ang)
        X[:, 2 * r - 1] = c * np.sin(ang)
    if d % 2:
        X[:, d - 1] = (-1.0) ** ks / math.sqrt(3.0)
    return BaselineRule(f"stroud{degree}", X, np.full(n_nodes, 1.0 / n_nodes), degree)


def baseline(kind: str, d: int, param: int, seed=0, measure: Measure | None = None) -> BaselineRule:
    """Dispatch by name: ``mc``, ``sobol``, ``sparse_grid``, ``stroud2``, ``stroud3``."""
    if kind == "mc":
        return monte_carlo(measure or TensorMeasure.uniform_cube(d), param, seed)
    if kind == "sobol":
        return sobol_rule(d, param)
    if kind in ("sparse_grid", "sparse-grid"):
        return sparse_grid(d, param)
    if kind in ("stroud2", "stroud3"):
        return stroud(d, int(kind[-1]))
    raise ValueError(f"unknown baseline {kind!r}")
