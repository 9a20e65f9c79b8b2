"""Initial positive rules: random candidate mesh plus a nonnegative LASSO homotopy."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .domains import Box, Zonotope

log = logging.getLogger(__name__)


@dataclass
class CandidateMesh:
    points: np.ndarray
    seed: object
    warnings: list[str] = field(default_factory=list)


def candidate_mesh(domain: Box | Zonotope, S: int, seed=0, n_moments: int | None = None) -> CandidateMesh:
    """``S`` points uniform over the domain, whatever the integration measure."""
    if not np.all(np.isfinite(domain.bounding_box.lower)) or not np.all(np.isfinite(domain.bounding_box.upper)):
        raise ValueError("candidate meshes need a bounded domain")
    rng = np.random.default_rng(seed)
    pts = domain.uniform_points(S, rng)
    warnings = []
    if n_moments is not None and S < 10 * n_moments:
        warnings.append(f"candidate mesh size {S} < 10 N = {10 * n_moments}")
    return CandidateMesh(pts, seed, warnings)


@dataclass
class SparseSolution:
    """Nonnegative coefficients on a subset of candidate columns.

    ``residual`` is the max-norm moment violation, ``status`` one of
    ``converged`` (residual <= eps), ``stalled`` (no column can enter
    without breaking positivity) or ``max-iter``.
    """

    support: np.ndarray
    weights: np.ndarray
    residual: float
    residual_l2: float
    iterations: int
    status: str
    path_residuals: list[float] = field(default_factory=list)


class _Cholesky:
    """Cholesky factor of the active Gram matrix with column insert/delete."""

    def __init__(self):
        self.L = np.zeros((0, 0))

    def add(self, cross: np.ndarray, diag: float, rtol: float = 1e-10) -> bool:
        n = self.L.shape[0]
        w = solve_triangular(self.L, cross, lower=True) if n else np.zeros(0)
        pivot = diag - w @ w
        if pivot <= rtol * diag:
            return False
        L = np.zeros((n + 1, n + 1))
        L[:n, :n] = self.L
        L[n, :n] = w
        L[n, n] = np.sqrt(pivot)
        self.L = L
        return True

    def remove(self, i: int):
        M = np.delete(self.L, i, axis=0)
        tail = M[i:, i:]
        if tail.size:
            r = np.linalg.qr(tail.T, mode="r")
            r = r * np.sign(np.diag(r))[:, None]
            M[i:, i:-1] = r.T
        self.L = M[:, :-1] if M.shape[1] else M

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        y = solve_triangular(self.L, rhs, lower=True)
        return solve_triangular(self.L.T, y, lower=False)


def _refactor(XA: np.ndarray) -> _Cholesky | None:
    """Fresh factor of the active Gram matrix, or None if a column is now dependent."""
    chol = _Cholesky()
    for i in range(XA.shape[1]):
        if not chol.add(XA[:, :i].T @ XA[:, i], float(XA[:, i] @ XA[:, i])):
            return None
    return chol


def nn_lasso(Phi, m, eps: float = 1e-8, max_iter: int | None = None) -> SparseSolution:
    """Nonnegative basis pursuit denoising by a LARS-LASSO homotopy.

    Follows the path of ``min 1/2 ||Phi v - m||^2 + lam * sum(v)``,
    ``v >= 0`` from large ``lam`` down to 0 on unit-normalised columns.
    Columns enter when their correlation reaches ``lam`` and leave when
    their coefficient reaches zero.  Stops once the max-norm residual is at
    most ``eps`` or when ``lam`` reaches 0 with no admissible column left.
    """
    Phi = np.asarray(Phi, dtype=float)
    m = np.asarray(m, dtype=float)
    N, S = Phi.shape
    norms = np.linalg.norm(Phi, axis=0)
    usable = norms > 0
    X = np.where(usable, Phi / np.where(usable, norms, 1.0), 0.0)
    if max_iter is None:
        max_iter = 50 * N + 1000

    beta = np.zeros(S)
    active: list[int] = []
    chol = _Cholesky()
    excluded = ~usable
    r = m.copy()
    history = [float(np.linalg.norm(r))]
    status = "max-iter"
    it = 0
    lam = 0.0
    dropped = -1
    refreshed = False

    c = X.T @ r
    cand = np.where(excluded, -np.inf, c)
    j = int(np.argmax(cand))
    if cand[j] <= 0:
        status = "stalled"
    else:
        lam = float(cand[j])
        chol.add(np.zeros(0), 1.0)
        active.append(j)

    while status == "max-iter" and it < max_iter:
        it += 1
        ones = np.ones(len(active))
        d = chol.solve(ones)
        u = X[:, active] @ d
        a = X.T @ u
        if it % 50 == 0:
            # correlations are updated incrementally; refresh to bound drift
            c = X.T @ r
        inactive = np.ones(S, dtype=bool)
        inactive[active] = False
        inactive &= ~excluded

        gamma_join = np.full(S, np.inf)
        denom = 1.0 - a
        ok = inactive & (denom > 1e-12)
        gamma_join[ok] = np.maximum((lam - c[ok]) / denom[ok], 0.0)
        if dropped >= 0:
            # a column that just left re-enters only after a positive step
            gamma_join[dropped] = np.inf
        k_join = int(np.argmin(gamma_join))
        g_join = gamma_join[k_join]

        b_act = beta[active]
        g_drop, i_drop = np.inf, -1
        neg = d < 0
        if neg.any():
            ratios = np.where(neg, -b_act / np.where(neg, d, 1.0), np.inf)
            i_drop = int(np.argmin(ratios))
            g_drop = ratios[i_drop]

        gamma = min(g_join, g_drop, lam)
        event = "drop" if g_drop <= min(g_join, lam) else ("end" if lam <= g_join else "join")
        r_new = r - gamma * u
        res2 = float(np.linalg.norm(r_new))
        if res2 > history[-1] * (1 + 1e-10):
            # rounding in a nearly singular active set: refactor once, then stop at the current iterate
            chol = None if refreshed else _refactor(X[:, active])
            if chol is None:
                status = "stalled"
                break
            refreshed = True
            continue
        refreshed = False
        beta[active] = b_act + gamma * d
        lam -= gamma
        r = r_new
        c = c - gamma * a
        assert res2 <= history[-1] * (1 + 1e-8) + 1e-13, "residual increased along the homotopy"
        history.append(res2)

        if np.max(np.abs(r)) <= eps:
            status = "converged"
            break
        if event == "drop":
            j = active.pop(i_drop)
            beta[j] = 0.0
            chol.remove(i_drop)
            dropped = j
            # columns rejected as dependent may fit the smaller active set
            excluded = ~usable
            continue
        dropped = -1
        if event == "end":
            # end of the path: nonnegative least squares on the active set
            lam = 0.0
            c = X.T @ r
            excluded = ~usable
            inactive = usable.copy()
            inactive[active] = False
            cand = np.where(inactive, c, -np.inf)
            k = int(np.argmax(cand))
            if cand[k] <= 1e-14 * max(1.0, np.abs(c).max()):
                status = "stalled"
                break
            # a column still correlates positively: restart the path from it,
            # keeping the current weights as a fixed nonnegative offset
            lam = float(cand[k])
            active = [k]
            chol = _Cholesky()
            chol.add(np.zeros(0), 1.0)
            continue
        cross = X[:, active].T @ X[:, k_join]
        if chol.add(cross, 1.0):
            active.append(k_join)
        else:
            excluded[k_join] = True

    support = np.flatnonzero(beta > 0)
    weights = beta[support] / norms[support]
    r_final = m - Phi[:, support] @ weights
    return SparseSolution(support, weights, float(np.max(np.abs(r_final))),
                          float(np.linalg.norm(r_final)), it, status, history)
