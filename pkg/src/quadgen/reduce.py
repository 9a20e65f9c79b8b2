"""Stage two: clustering, constrained least-squares refinement and the increment loop.

Also holds the rule container, independent verification, quasi-optimality
diagnostics and the analytic diagonal Gauss construction.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from cvxopt import matrix, solvers
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .domains import Box, TensorMeasure, Zonotope
from .indexset import MultiIndexSet, anova_set, maximal_half_set
from .l1init import candidate_mesh, nn_lasso
from .moments import MomentProblem, build_problem
from .orthopoly import TensorBasis, christoffel_lambda, gauss_rule, recurrence_coefficients

log = logging.getLogger(__name__)

RULE_SCHEMA = "quadgen.rule/1"
TAU = 1e-10
SUCCESS_F = 1e-8
FEAS_TOL = 1e-10


class DomainViolationError(ValueError):
    pass


def digest(obj) -> str:
    """Short stable hash of a JSON-serialisable object."""
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    residual: float = float("nan")
    success: bool = False
    index_set: MultiIndexSet | None = None
    metadata: dict = field(default_factory=dict)
    initial: "QuadratureRule | None" = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(self.nodes) != len(self.weights):
            raise ValueError("nodes and weights differ in length")
        if len(self.weights) < 1:
            raise ValueError("a rule needs at least one node")

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def integrate(self, f) -> float:
        """``sum_m w_m f(x_m)`` with ``f`` vectorised over rows."""
        return float(self.weights @ np.asarray(f(self.nodes), dtype=float))

    def to_dict(self) -> dict:
        return {
            "schema": RULE_SCHEMA,
            "dim": self.dim,
            "index_set": None if self.index_set is None else [list(a) for a in self.index_set],
            "nodes": self.nodes.tolist(),
            "weights": self.weights.tolist(),
            "residual_l2": self.residual,
            "success": bool(self.success),
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, default=_json_default)

    @classmethod
    def from_dict(cls, data: dict) -> "QuadratureRule":
        if data.get("schema") != RULE_SCHEMA:
            raise ValueError(f"unsupported rule schema {data.get('schema')!r}")
        lam = None
        if data.get("index_set") is not None:
            lam = MultiIndexSet.from_iterable(data["index_set"], dim=data["dim"])
        return cls(np.asarray(data["nodes"], dtype=float).reshape(-1, data["dim"]), data["weights"],
                   data.get("residual_l2", float("nan")), data.get("success", False), lam,
                   data.get("metadata", {}))

    @classmethod
    def from_json(cls, text: str) -> "QuadratureRule":
        return cls.from_dict(json.loads(text))


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


# ---------------------------------------------------------------- clustering

def cluster(X, w, M: int):
    """Greedy merge of the lightest point into its nearest neighbour until ``M`` remain."""
    X = np.array(X, dtype=float, ndmin=2)
    if X.shape[0] == 1 and np.ndim(w) == 1 and len(w) > 1:
        X = X.T
    w = np.array(w, dtype=float)
    if not 1 <= M <= len(w):
        raise ValueError("need 1 <= M <= number of points")
    X, w = X.copy(), w.copy()
    while len(w) > M:
        i = int(np.argmin(w))
        dist = np.sum((X - X[i]) ** 2, axis=1)
        dist[i] = np.inf
        j = int(np.argmin(dist))
        tot = w[i] + w[j]
        X[j] = (w[i] * X[i] + w[j] * X[j]) / tot
        w[j] = tot
        X = np.delete(X, i, axis=0)
        w = np.delete(w, i)
    return X, w


# ---------------------------------------------------------------- objective

class MomentObjective:
    """``f(x, w) = ||m - sum_m w_m p(x_m)||^2`` with its residual Jacobian.

    Parameters are packed as ``z = [x_1, ..., x_M, w]`` with each node's
    ``d`` coordinates contiguous.
    """

    def __init__(self, problem: MomentProblem):
        self.problem = problem
        self.d = problem.dim

    def unpack(self, z):
        z = np.asarray(z, dtype=float)
        M = len(z) // (self.d + 1)
        return z[:M * self.d].reshape(M, self.d), z[M * self.d:]

    @staticmethod
    def pack(x, w):
        return np.concatenate([np.asarray(x, dtype=float).ravel(), np.asarray(w, dtype=float)])

    def residual(self, x, w) -> np.ndarray:
        return self.problem.residual(x, w)

    def value(self, x, w) -> float:
        r = self.residual(x, w)
        return float(r @ r)

    def residual_jacobian(self, x, w):
        """``r`` (N) and ``dr/dz`` (N x M(d+1))."""
        x = np.atleast_2d(x)
        V, G = self.problem.basis.evaluate_with_gradient(x)
        r = self.problem.moments - w @ V
        M, d = x.shape
        Jx = -(G * w[None, :, None]).transpose(2, 1, 0).reshape(len(r), M * d)
        return r, np.hstack([Jx, -V.T])

    def gradient(self, x, w) -> np.ndarray:
        """Gradient of ``f`` in packed order (twice ``J^T r``)."""
        r, J = self.residual_jacobian(x, w)
        return 2.0 * J.T @ r


# ---------------------------------------------------------------- refinement

@dataclass
class RefineReport:
    objective: list[float]
    gradient_norms: list[float]
    exit_reason: str
    success: bool
    iterations: int
    rejected: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RefineOptions:
    max_iter: int = 1000
    tau: float = TAU
    success_f: float = SUCCESS_F
    mu0: float = 1e-3


class _BoxConstraints:
    def __init__(self, box: Box, M: int):
        d = box.dim
        self.lo = np.concatenate([np.tile(box.lower, M), np.zeros(M)])
        self.hi = np.concatenate([np.tile(box.upper, M), np.full(M, np.inf)])
        self.scale = np.concatenate([np.tile(box.upper - box.lower, M), np.ones(M)])
        self.n_x = M * d

    def feasible(self, z, tol=FEAS_TOL) -> bool:
        return bool(np.all(z >= self.lo - tol * self.scale) and np.all(z <= self.hi + tol * self.scale))

    def project(self, z):
        return np.clip(z, self.lo, self.hi)

    def projected_gradient(self, z, g):
        at_lo = z <= self.lo + 1e-12 * self.scale
        at_hi = z >= self.hi - 1e-12 * self.scale
        gs = g.copy()
        gs[(at_lo & (g > 0)) | (at_hi & (g < 0))] = 0.0
        return gs


_QP_OPTIONS = {"show_progress": False, "abstol": 1e-14, "reltol": 1e-12, "feastol": 1e-12}


class _ZonotopeConstraints:
    def __init__(self, zono: Zonotope, M: int):
        self.Z = zono
        self.M = M
        self.d = zono.dim
        self.scale = np.maximum(1.0, np.abs(zono.offsets))

    def _split(self, z):
        return z[:self.M * self.d].reshape(self.M, self.d), z[self.M * self.d:]

    def feasible(self, z, tol=FEAS_TOL) -> bool:
        x, w = self._split(z)
        slack = x @ self.Z.normals.T - self.Z.offsets
        return bool(np.all(slack <= tol * self.scale) and np.all(w >= -tol))

    def project(self, z):
        return z

    def projected_gradient(self, z, g):
        x, w = self._split(z)
        gx, gw = self._split(g.copy())
        gx = gx.copy()
        gw = gw.copy()
        gw[(w <= 1e-12) & (gw > 0)] = 0.0
        active = x @ self.Z.normals.T - self.Z.offsets >= -1e-12 * self.scale
        for m in np.flatnonzero(active.any(axis=1)):
            v = -gx[m]
            for n in self.Z.normals[active[m]]:
                out = n @ v
                if out > 0:
                    v = v - out * n
            gx[m] = -v
        return np.concatenate([gx.ravel(), gw])

    def qp_step(self, z, H, q):
        """Minimise ``1/2 dz^T H dz + q^T dz`` over the feasible step set."""
        x, w = self._split(z)
        n = len(z)
        M, d = self.M, self.d
        F = self.Z.normals
        rows = []
        for m in range(M):
            block = np.zeros((len(F), n))
            block[:, m * d:(m + 1) * d] = F
            rows.append(block)
        Gw = np.zeros((M, n))
        Gw[np.arange(M), M * d + np.arange(M)] = -1.0
        G = np.vstack(rows + [Gw])
        h = np.concatenate([(self.Z.offsets - x @ F.T).ravel(), w])
        h = np.maximum(h, 0.0)
        Hs = 0.5 * (H + H.T)
        try:
            sol = solvers.qp(matrix(Hs), matrix(q), matrix(G), matrix(h), options=_QP_OPTIONS)
        except (ValueError, ArithmeticError):
            return None
        if sol["x"] is None:
            return None
        step = np.array(sol["x"]).ravel()
        # interior-point solutions may sit a hair outside; pull back along the step
        slack = h - G @ step
        if np.any(slack < 0):
            Gs = G @ step
            ratio = np.where(Gs > 0, h / np.where(Gs > 0, Gs, 1.0), np.inf)
            step = step * min(1.0, float(ratio.min()))
        return step


def _constraints(domain, M):
    if isinstance(domain, Zonotope):
        return _ZonotopeConstraints(domain, M)
    return _BoxConstraints(domain.bounding_box, M)


def _lm_step(J, r, D, mu):
    """``-(J^T J + mu D)^{-1} J^T r`` solved in the smaller of the two dimensions."""
    Js = J / np.sqrt(D)
    N, n = Js.shape
    try:
        if n <= N:
            A = Js.T @ Js
            A[np.diag_indices(n)] += mu
            step = -cho_solve(cho_factor(A), Js.T @ r)
        else:
            A = Js @ Js.T
            A[np.diag_indices(N)] += mu
            step = -Js.T @ cho_solve(cho_factor(A), r)
    except LinAlgError:
        aug = np.vstack([Js, math.sqrt(mu) * np.eye(n)])
        step = np.linalg.lstsq(aug, np.concatenate([-r, np.zeros(n)]), rcond=None)[0]
    return step / np.sqrt(D)


def refine(x0, w0, problem: MomentProblem, max_iter: int = 1000, options: RefineOptions | None = None):
    """Constrained Levenberg-Marquardt on the moment residual.

    Box domains use projected steps on the free variables; zonotopes solve
    each damped Gauss-Newton step as a QP over the facet inequalities.
    Returns ``(rule, report)`` with the best iterate.
    """
    opts = options or RefineOptions(max_iter=max_iter)
    obj = MomentObjective(problem)
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    w0 = np.asarray(w0, dtype=float).reshape(-1)
    M = len(w0)
    cons = _constraints(problem.domain, M)
    z = obj.pack(x0, w0)
    if not cons.feasible(z):
        raise DomainViolationError("initial rule violates the domain or positivity constraints")
    z = cons.project(z)
    zono = isinstance(cons, _ZonotopeConstraints)

    r, J = obj.residual_jacobian(*obj.unpack(z))
    f = float(r @ r)
    D = np.maximum(np.sum(J * J, axis=0), 1e-12)
    mu = opts.mu0
    nu = 2.0
    traj, gnorms = [f], []
    reason = "max-iter"
    rejected = 0
    it = 0
    while it < opts.max_iter:
        g = 2.0 * J.T @ r
        gs = cons.projected_gradient(z, g)
        gnorms.append(float(np.max(np.abs(gs))) if gs.size else 0.0)
        if gnorms[-1] < opts.tau:
            reason = "gradient-small"
            break
        it += 1
        if zono:
            H = J.T @ J + mu * np.diag(D)
            step = cons.qp_step(z, H, J.T @ r)
            if step is None:
                reason = "objective-stall"
                break
            z_new = z + step
        else:
            at_lo = z <= cons.lo + 1e-12 * cons.scale
            at_hi = z >= cons.hi - 1e-12 * cons.scale
            free = ~((at_lo & (g > 0)) | (at_hi & (g < 0)))
            step = np.zeros_like(z)
            step[free] = _lm_step(J[:, free], r, D[free], mu)
            z_new = cons.project(z + step)
            step = z_new - z
        r_new = obj.residual(*obj.unpack(z_new))
        f_new = float(r_new @ r_new)
        pred = f - float(np.sum((r + J @ step) ** 2))
        rho = (f - f_new) / pred if pred > 0 else -1.0
        if f_new < f:
            z, f_prev, f = z_new, f, f_new
            r, J = obj.residual_jacobian(*obj.unpack(z))
            D = np.maximum(D, np.sum(J * J, axis=0))
            mu *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3) if rho > 0 else 2.0
            nu = 2.0
            traj.append(f)
            if abs(f - f_prev) < opts.tau * f:
                reason = "objective-stall"
                break
        else:
            rejected += 1
            mu *= nu
            nu *= 2.0
            if mu > 1e20:
                reason = "objective-stall"
                break
        mu = max(mu, 1e-20)

    x, w = obj.unpack(z)
    w = np.maximum(w, 0.0)
    assert cons.feasible(obj.pack(x, w)), "refined rule left the feasible set"
    report = RefineReport(traj, gnorms, reason, f < opts.success_f, it, rejected)
    rule = QuadratureRule(x, w, math.sqrt(f), report.success, problem.index_set,
                          {"objective": f, "iterations": it, "exit_reason": reason})
    return rule, report


# ---------------------------------------------------------------- driver

@dataclass
class GenerateOptions:
    seed: int = 0
    S: int | None = None
    eps: float = 1e-8
    max_increments: int = 10
    max_iter: int = 1000
    M: int | None = None
    use_lower_bound: bool = True


def starting_size(index_set: MultiIndexSet, use_lower_bound: bool = True) -> tuple[int, int | None]:
    """``max(ceil(N / (d + 1)), L)`` and ``L`` (None when not computed)."""
    heur = -(-len(index_set) // (index_set.dim + 1))
    L = None
    if use_lower_bound and index_set.is_downward_closed():
        L = maximal_half_set(index_set).size
        heur = max(heur, L)
    return heur, L


def stage_one(problem: MomentProblem, seed=0, S: int | None = None, eps: float = 1e-8):
    N = problem.size
    S = S or max(10 * N, 1000)
    mesh = candidate_mesh(problem.domain, S, seed, N)
    Phi = problem.basis.evaluate(mesh.points).T
    sol = nn_lasso(Phi, problem.moments, eps)
    return mesh, sol


def generate(problem: MomentProblem, options: GenerateOptions | None = None, **kw) -> QuadratureRule:
    """Reduced rule: nonnegative l1 start, clustering, refinement, increments of ``M``."""
    opts = options or GenerateOptions(**kw)
    N = problem.size
    mesh, sol = stage_one(problem, opts.seed, opts.S, opts.eps)
    X0, w0 = mesh.points[sol.support], sol.weights
    K = len(w0)
    if opts.M is not None:
        M0, L = opts.M, None
    else:
        M0, L = starting_size(problem.index_set, opts.use_lower_bound)
    meta = {
        "lambda_digest": digest([list(a) for a in problem.index_set]),
        "measure_digest": digest(problem.measure.describe() if problem.measure is not None else None),
        "measure": problem.measure.describe() if problem.measure is not None else None,
        "basis": problem.info.get("basis"),
        "seed": opts.seed,
        "N": N,
        "L": L,
        "M_requested": M0,
        "candidate_mesh": len(mesh.points),
        "warnings": list(mesh.warnings),
        "stage_one": {"points": K, "residual_linf": sol.residual, "status": sol.status,
                      "iterations": sol.iterations},
    }
    if K == 0:
        raise RuntimeError("the l1 stage produced no positive weights")
    best = None
    attempts = []
    for inc in range(opts.max_increments + 1):
        M = M0 + inc
        if M > K:
            if inc > 0 and M0 + inc - 1 >= K:
                break
            meta["warnings"].append(f"stage-one rule has only {K} points; using M={K}")
            M = K
        xc, wc = cluster(X0, w0, M)
        rule, rep = refine(xc, wc, problem, opts.max_iter)
        attempts.append({"M": M, "objective": rep.objective[-1], "iterations": rep.iterations,
                         "exit_reason": rep.exit_reason})
        if best is None or rep.objective[-1] < best[1].objective[-1]:
            best = (rule, rep, inc)
        if rep.success:
            best = (rule, rep, inc)
            break
    rule, rep, inc = best
    meta.update({"increments_used": inc, "iterations": rep.iterations, "objective": rep.objective[-1],
                 "exit_reason": rep.exit_reason, "attempts": attempts})
    rule.metadata = meta
    rule.initial = QuadratureRule(X0, w0, sol.residual_l2, sol.residual <= opts.eps, problem.index_set,
                                  {"stage": "l1-initial", **meta["stage_one"]})
    return rule


# ---------------------------------------------------------------- diagnostics

def verify(rule: QuadratureRule, problem: MomentProblem) -> dict:
    """Fresh moment residuals of ``rule`` in the problem basis."""
    if rule.dim != problem.dim:
        raise ValueError("rule and problem dimensions differ")
    V = problem.basis.evaluate(rule.nodes)
    approx = rule.weights @ V
    err = problem.moments - approx
    table = [{"index": list(a), "moment": float(m), "rule": float(q), "error": float(e)}
             for a, m, q, e in zip(problem.index_set, problem.moments, approx, err)]
    return {"residual_l2": float(np.linalg.norm(err)), "residual_linf": float(np.max(np.abs(err))),
            "table": table}


def quasi_optimality_report(rule: QuadratureRule, index_set: MultiIndexSet, basis: TensorBasis,
                            residual_tol: float = 1e-8) -> dict:
    """Compare ``M`` with ``L`` and the weights with the Christoffel functions of every maximal half-set.

    ``basis`` must be orthonormal for the measure (no transform).
    """
    hs = maximal_half_set(index_set)
    report = {"M": rule.size, "L": hs.size, "half_sets": len(hs.maximal), "weight_check": None}
    if rule.size == hs.size:
        dev = 0.0
        for theta in hs.maximal:
            lam = christoffel_lambda(theta, basis.recs, rule.nodes)
            dev = max(dev, float(np.max(np.abs(rule.weights - lam))))
        report["weight_check"] = dev
    exact = not np.isfinite(rule.residual) or rule.residual <= residual_tol
    report["is_quasi_optimal"] = bool(rule.size == hs.size and exact)
    return report


def diagonal_gauss_rule(measure: TensorMeasure, d: int | None = None, n: int = 2, signs=None) -> QuadratureRule:
    """Rule with ``floor(n/2)+1`` nodes on a diagonal, exact for ``B_0(1) cap B_1(n)``.

    Node ``m`` is ``(s_1 t_m, ..., s_d t_m)`` for the univariate Gauss nodes
    ``t_m``; sign flips require a symmetric factor.
    """
    d = d or measure.dim
    if measure.dim != d:
        raise ValueError("measure dimension differs from d")
    f0 = measure.factors[0]
    if any(f != f0 for f in measure.factors[1:]):
        raise ValueError("diagonal rules need identical univariate factors")
    signs = np.ones(d) if signs is None else np.asarray(signs, dtype=float)
    if signs.shape != (d,) or not np.all(np.abs(signs) == 1):
        raise ValueError("signs must be a length-d vector of +-1")
    if np.any(signs < 0) and not f0.symmetric:
        raise ValueError("sign flips need a symmetric univariate measure")
    M = n // 2 + 1
    g = gauss_rule(recurrence_coefficients(f0, M + 1), M)
    nodes = g.nodes[:, None] * signs[None, :]
    lam = anova_set(d, 1, n)
    problem = build_problem(measure, lam)
    rule = QuadratureRule(nodes, g.weights, index_set=lam,
                          metadata={"construction": "diagonal-gauss", "signs": signs.tolist(), "n": n})
    rule.residual = verify(rule, problem)["residual_l2"]
    rule.success = rule.residual ** 2 < SUCCESS_F
    return rule
