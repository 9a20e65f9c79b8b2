import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadgen.domains import RidgeMeasure, TensorMeasure, random_orthonormal_rows
from quadgen.indexset import anova_set, maximal_half_set, total_degree_set
from quadgen.moments import build_problem
from quadgen.orthopoly import gauss_rule, jacobi, recurrence_coefficients, uniform
from quadgen.reduce import (DomainViolationError, MomentObjective, QuadratureRule, cluster, diagonal_gauss_rule,
                            generate, quasi_optimality_report, refine, verify)


def uniform_problem(d, k):
    return build_problem(TensorMeasure.uniform_cube(d), total_degree_set(d, k))


def legendre_gauss(M):
    return gauss_rule(recurrence_coefficients(uniform(), M + 1), M)


# ---------------------------------------------------------------- clustering

def test_cluster_two_points():
    x, w = cluster(np.array([[0.0, 0.0], [1.0, 2.0]]), np.array([1.0, 3.0]), 1)
    assert np.allclose(x, [[0.75, 1.5]]) and w.tolist() == [4.0]


def test_cluster_equal_weights_midpoint():
    x, w = cluster(np.array([[-1.0], [3.0]]), np.array([0.5, 0.5]), 1)
    assert x.tolist() == [[1.0]] and w.tolist() == [1.0]


def test_cluster_hand_example():
    x, w = cluster(np.array([[0.0], [1.0], [10.0]]), np.array([0.1, 0.2, 0.7]), 2)
    assert np.allclose(x.ravel(), [2 / 3, 10.0]) and np.allclose(w, [0.3, 0.7])


def test_cluster_bad_size():
    with pytest.raises(ValueError):
        cluster(np.zeros((3, 1)), np.ones(3), 4)


@given(st.integers(0, 10_000), st.integers(2, 40), st.integers(1, 3))
@settings(max_examples=50, deadline=None)
def test_cluster_conserves_mass_and_hull(seed, S, d):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (S, d))
    w = rng.uniform(0.01, 1, S)
    M = int(rng.integers(1, S + 1))
    xc, wc = cluster(X, w, M)
    assert len(wc) == M and np.all(wc > 0)
    assert abs(wc.sum() - w.sum()) <= 1e-14 * w.sum() * S
    assert np.all(xc >= X.min(axis=0) - 1e-14) and np.all(xc <= X.max(axis=0) + 1e-14)


# ---------------------------------------------------------------- objective

@pytest.mark.parametrize("d", [1, 2, 3])
def test_jacobian_finite_differences(d):
    prob = build_problem(TensorMeasure((uniform(),) + (jacobi(1, 1),) * (d - 1)), total_degree_set(d, 4))
    obj = MomentObjective(prob)
    rng = np.random.default_rng(d)
    h = 1e-6
    for _ in range(20):
        M = 3
        x = rng.uniform(-0.9, 0.9, (M, d))
        w = rng.uniform(0.1, 1, M)
        z = obj.pack(x, w)
        r, J = obj.residual_jacobian(x, w)
        fd = np.empty_like(J)
        for i in range(len(z)):
            e = np.zeros_like(z)
            e[i] = h
            fd[:, i] = (obj.residual(*obj.unpack(z + e)) - obj.residual(*obj.unpack(z - e))) / (2 * h)
        assert np.linalg.norm(J - fd) <= 1e-5 * np.linalg.norm(J)
        assert np.allclose(r, obj.residual(x, w))


def test_gradient_is_twice_jt_r():
    prob = uniform_problem(2, 3)
    obj = MomentObjective(prob)
    x = np.array([[0.1, -0.2], [0.5, 0.3]])
    w = np.array([0.4, 0.5])
    z = obj.pack(x, w)
    g = obj.gradient(x, w)
    h = 1e-6
    fd = np.array([(obj.value(*obj.unpack(z + h * e)) - obj.value(*obj.unpack(z - h * e))) / (2 * h)
                   for e in np.eye(len(z))])
    assert np.allclose(g, fd, rtol=1e-6, atol=1e-9)


# ---------------------------------------------------------------- refinement

def test_refine_exact_start():
    g = legendre_gauss(2)
    rule, rep = refine(g.nodes[:, None], g.weights, uniform_problem(1, 3))
    assert rep.objective[0] < 1e-20 and rep.iterations == 0
    assert np.array_equal(rule.nodes[:, 0], g.nodes) and np.array_equal(rule.weights, g.weights)


def test_refine_perturbed_gauss():
    g = legendre_gauss(2)
    rule, rep = refine(g.nodes[:, None] + 0.05, g.weights, uniform_problem(1, 3))
    assert rep.success and rep.objective[-1] < 1e-16
    assert np.allclose(np.sort(rule.nodes[:, 0]), [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-8)
    assert np.allclose(rule.weights, 0.5, atol=1e-8)
    assert np.all(np.diff(rep.objective) <= 0)


@pytest.mark.parametrize("M", [2, 4, 6, 8])
def test_refine_recovers_gauss_from_noise(M):
    g = legendre_gauss(M)
    rng = np.random.default_rng(M)
    x0 = np.clip(g.nodes + rng.normal(0, 0.02, M), -1, 1)
    rule, rep = refine(x0[:, None], g.weights, uniform_problem(1, 2 * M - 1))
    assert rep.success
    assert np.allclose(np.sort(rule.nodes[:, 0]), g.nodes, atol=1e-7)


def test_refine_rejects_infeasible_start():
    with pytest.raises(DomainViolationError):
        refine(np.array([[1.5]]), np.array([1.0]), uniform_problem(1, 1))
    with pytest.raises(DomainViolationError):
        refine(np.array([[0.0], [0.5]]), np.array([1.5, -0.5]), uniform_problem(1, 1))


def test_refine_keeps_bounds():
    # a 2-point rule started at the corners is pushed against the box
    rule, rep = refine(np.array([[-1.0, -1.0], [1.0, 1.0]]), np.array([0.5, 0.5]), uniform_problem(2, 3))
    assert np.all(np.abs(rule.nodes) <= 1 + 1e-10) and np.all(rule.weights >= 0)
    assert np.all(np.diff(rep.objective) <= 0)
    assert rep.exit_reason in ("objective-stall", "gradient-small", "max-iter")


def test_refine_zonotope():
    A = random_orthonormal_rows(2, 10, 1)
    mu = RidgeMeasure.build(A)
    prob = build_problem(mu, total_degree_set(2, 3))
    rng = np.random.default_rng(0)
    y = rng.uniform(-1, 1, (6, 10)) @ A.T
    rule, rep = refine(y, np.full(6, 1 / 6), prob, max_iter=300)
    assert np.all(mu.domain.contains(rule.nodes, tol=1e-10)) and np.all(rule.weights >= 0)
    assert rep.objective[-1] < rep.objective[0]
    assert np.all(np.diff(rep.objective) <= 0)


# ---------------------------------------------------------------- driver

def test_generate_recovers_gauss():
    rule = generate(uniform_problem(1, 9), seed=0)
    g = legendre_gauss(5)
    order = np.argsort(rule.nodes[:, 0])
    assert rule.size == 5 and rule.success
    assert np.allclose(rule.nodes[order, 0], g.nodes, atol=1e-8)
    assert np.allclose(rule.weights[order], g.weights, atol=1e-8)


def test_generate_deterministic_and_metadata():
    a = generate(uniform_problem(2, 6), seed=3)
    b = generate(uniform_problem(2, 6), seed=3)
    assert np.array_equal(a.nodes, b.nodes) and np.array_equal(a.weights, b.weights)
    meta = a.metadata
    for key in ("lambda_digest", "measure_digest", "seed", "M_requested", "increments_used", "iterations",
                "stage_one", "attempts"):
        assert key in meta
    assert meta["increments_used"] <= 10 and meta["M_requested"] == max(math.ceil(28 / 3), 10)
    assert a.initial is not None and a.initial.size >= a.size


def test_generate_increment_cap():
    rule = generate(uniform_problem(2, 4), seed=0, max_increments=0, max_iter=3)
    assert rule.metadata["increments_used"] == 0 and len(rule.metadata["attempts"]) == 1


def test_generate_ridge_inside_zonotope():
    mu = RidgeMeasure.build(random_orthonormal_rows(2, 20, 0))
    rule = generate(build_problem(mu, total_degree_set(2, 4)), seed=0)
    assert rule.success
    assert np.all(mu.domain.contains(rule.nodes, tol=1e-10)) and np.all(rule.weights >= 0)


# ---------------------------------------------------------------- verification

def test_verify_exact_gauss():
    g = legendre_gauss(5)
    assert verify(QuadratureRule(g.nodes[:, None], g.weights), uniform_problem(1, 9))["residual_l2"] < 1e-13


def test_verify_zeroed_weight():
    prob = uniform_problem(1, 9)
    g = legendre_gauss(5)
    w = g.weights.copy()
    w[2] = 0
    res = verify(QuadratureRule(g.nodes[:, None], w), prob)
    dropped = g.weights[2] * prob.basis.evaluate(g.nodes[2:3, None])[0]
    assert res["residual_l2"] == pytest.approx(np.linalg.norm(dropped), rel=1e-12)
    assert len(res["table"]) == 10


def test_rule_json_roundtrip():
    rule = generate(uniform_problem(2, 4), seed=1)
    back = QuadratureRule.from_json(rule.to_json())
    assert np.array_equal(back.nodes, rule.nodes) and np.array_equal(back.weights, rule.weights)
    assert back.index_set == rule.index_set and back.metadata["seed"] == 1
    assert verify(back, uniform_problem(2, 4))["residual_l2"] == pytest.approx(rule.residual, abs=1e-12)


def test_rule_json_schema_checked():
    with pytest.raises(ValueError):
        QuadratureRule.from_dict({"schema": "other", "dim": 1, "nodes": [[0]], "weights": [1]})


# ---------------------------------------------------------------- quasi-optimality and diagonal rules

def test_quasi_optimal_gauss():
    g = legendre_gauss(5)
    prob = uniform_problem(1, 9)
    rule = QuadratureRule(g.nodes[:, None], g.weights, verify(QuadratureRule(g.nodes[:, None], g.weights),
                                                             prob)["residual_l2"])
    rep = quasi_optimality_report(rule, prob.index_set, prob.basis)
    assert rep["is_quasi_optimal"] and rep["weight_check"] < 1e-10 and rep["L"] == 5


def test_not_quasi_optimal_above_bound():
    prob = uniform_problem(2, 4)
    rule = generate(prob, seed=0)
    rep = quasi_optimality_report(rule, prob.index_set, prob.basis)
    assert rep["L"] == 6 and (rule.size > 6) == (not rep["is_quasi_optimal"])


def test_diagonal_d1_is_gauss():
    rule = diagonal_gauss_rule(TensorMeasure.uniform_cube(1), n=5)
    assert np.allclose(rule.nodes[:, 0], legendre_gauss(3).nodes)


@pytest.mark.parametrize("measure", [TensorMeasure.uniform_cube(5), TensorMeasure((jacobi(1, 1),) * 5)])
def test_diagonal_d5_n6(measure):
    rule = diagonal_gauss_rule(measure, n=6)
    assert rule.size == 4 and len(rule.index_set) == 31
    prob = build_problem(measure, rule.index_set)
    assert verify(rule, prob)["residual_l2"] < 1e-12
    rep = quasi_optimality_report(rule, prob.index_set, prob.basis)
    assert rep["half_sets"] == 5 and rep["weight_check"] < 1e-10 and rep["is_quasi_optimal"]


def test_diagonal_signs():
    mu = TensorMeasure.uniform_cube(3)
    plus = diagonal_gauss_rule(mu, n=4)
    flip = diagonal_gauss_rule(mu, n=4, signs=[1, -1, 1])
    assert verify(flip, build_problem(mu, flip.index_set))["residual_l2"] < 1e-12
    assert {tuple(p) for p in np.round(flip.nodes, 12)} != {tuple(p) for p in np.round(plus.nodes, 12)}


def test_diagonal_errors():
    with pytest.raises(ValueError):
        diagonal_gauss_rule(TensorMeasure((uniform(), jacobi(1, 1))), n=4)
    with pytest.raises(ValueError):
        diagonal_gauss_rule(TensorMeasure((jacobi(0, 2),) * 2), n=4, signs=[1, -1])


# ---------------------------------------------------------------- the mixed-measure two-point example

def mixed_problem():
    return build_problem(TensorMeasure((uniform(), jacobi(1, 1))), anova_set(2, 1, 3))


def test_mixed_example_two_point_rule_exists():
    # with q1 = sqrt(5) t for the second factor, both Christoffel conditions give 3 x1^2 = 5 x2^2
    prob = mixed_problem()
    assert len(prob.index_set) == 7 and maximal_half_set(prob.index_set).size == 2
    nodes = np.array([[1 / math.sqrt(3), 1 / math.sqrt(5)], [-1 / math.sqrt(3), -1 / math.sqrt(5)]])
    rule = QuadratureRule(nodes, [0.5, 0.5])
    assert verify(rule, prob)["residual_l2"] < 1e-14


def test_mixed_example_some_small_rule_succeeds():
    prob = mixed_problem()
    assert any(generate(prob, seed=s).size <= 7 for s in range(3))
