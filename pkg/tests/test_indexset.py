import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadgen.indexset import (MultiIndexSet, NotDownwardClosedError, UnboundedIndexSetError, anova_set,
                              ball_set, downward_closure, heuristic_size, is_convex, maximal_half_set,
                              minkowski_sum, total_degree_set)


def S(*idx):
    return MultiIndexSet.from_iterable(idx)


def brute_half_set_size(lam: MultiIndexSet) -> int:
    """Largest Theta with Theta + Theta inside Lambda, by trying every candidate subset."""
    cand = [a for a in lam if tuple(2 * x for x in a) in lam]
    for size in range(len(cand), 0, -1):
        for sub in itertools.combinations(cand, size):
            if all(tuple(x + y for x, y in zip(a, b)) in lam for a in sub for b in sub):
                return size
    return 0


@st.composite
def downward_closed_sets(draw, max_dim=3, max_deg=3):
    d = draw(st.integers(1, max_dim))
    gens = draw(st.lists(st.tuples(*[st.integers(0, max_deg)] * d), min_size=1, max_size=4))
    return downward_closure(MultiIndexSet.from_iterable(gens, dim=d))


# ---------------------------------------------------------------- constructors

@pytest.mark.parametrize("d,k,size", [(2, 1, 3), (2, 20, 231), (3, 20, 1771), (4, 13, 2380),
                                      (5, 10, 3003), (10, 5, 3003)])
def test_total_degree_size(d, k, size):
    assert len(total_degree_set(d, k)) == size


def test_total_degree_small_listing():
    assert set(total_degree_set(2, 1)) == {(0, 0), (1, 0), (0, 1)}


@pytest.mark.parametrize("d", range(1, 11))
@pytest.mark.parametrize("k", [0, 1, 4, 10])
def test_total_degree_binomial(d, k):
    if math.comb(k + d, d) > 200_000:
        pytest.skip("too large for a unit test")
    assert len(total_degree_set(d, k)) == math.comb(k + d, d)


def test_ball_inf():
    lam = ball_set(2, math.inf, 2)
    assert set(lam) == {(i, j) for i in range(3) for j in range(3)}


def test_ball_zero_with_cap():
    assert set(ball_set(2, 0, 1, cap=2)) == {(0, 0), (0, 1), (0, 2), (1, 0), (2, 0)}


def test_ball_zero_unbounded():
    with pytest.raises(UnboundedIndexSetError):
        ball_set(2, 0, 1)


def test_ball_trivial():
    assert list(ball_set(3, 1, 0)) == [(0, 0, 0)]


def test_anova_full_order_is_total_degree():
    assert anova_set(3, 3, 5) == total_degree_set(3, 5)


def test_anova_sizes():
    assert len(anova_set(20, 2, 2)) == 1 + 20 + 20 + math.comb(20, 2)
    assert set(anova_set(2, 1, 2)) == {(0, 0), (0, 1), (0, 2), (1, 0), (2, 0)}


def test_canonical_order_and_dedup():
    lam = S((1, 0), (0, 0), (1, 0), (0, 1))
    assert list(lam) == sorted(set(lam))
    assert len(lam) == 3


def test_json_roundtrip():
    lam = anova_set(4, 2, 3)
    data = json.loads(lam.to_json())
    assert data["schema"] == "quadgen.indexset/1"
    assert MultiIndexSet.from_json(lam.to_json()) == lam
    assert MultiIndexSet.from_json(json.dumps([[0, 0], [1, 0]])) == S((0, 0), (1, 0))


# ---------------------------------------------------------------- algebra

def test_downward_closure_examples():
    assert set(downward_closure(S((2, 1)))) == {(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1)}
    assert set(downward_closure(S((0, 3)))) == {(0, 0), (0, 1), (0, 2), (0, 3)}
    lam = total_degree_set(3, 4)
    assert downward_closure(lam) == lam


def test_minkowski_examples():
    theta = S((0, 0), (1, 0), (0, 1), (1, 1))
    assert minkowski_sum(theta, theta) == ball_set(2, math.inf, 2)
    lam = total_degree_set(2, 3)
    assert minkowski_sum(lam, S((0, 0))) == lam
    assert set(minkowski_sum(S((1, 0)), S((0, 1)))) == {(1, 1)}
    with pytest.raises(ValueError):
        minkowski_sum(S((1, 0)), S((1, 0, 0)))


@pytest.mark.parametrize("lam,expected", [
    (total_degree_set(3, 4), True),
    (anova_set(2, 1, 2), False),
    (S((0, 0)), True),
    (ball_set(2, math.inf, 3), True),
])
def test_is_convex(lam, expected):
    assert is_convex(lam) is expected


@given(downward_closed_sets())
@settings(max_examples=60, deadline=None)
def test_closure_idempotent_and_monotone(lam):
    c = downward_closure(lam)
    assert downward_closure(c) == c
    assert c.is_downward_closed()
    extra = MultiIndexSet.from_iterable(list(lam) + [tuple(x + 1 for x in lam.indices[-1])], dim=lam.dim)
    assert downward_closure(lam).issubset(downward_closure(extra))


@given(downward_closed_sets(), downward_closed_sets())
@settings(max_examples=40, deadline=None)
def test_minkowski_contains_doubling(a, b):
    if a.dim != b.dim:
        return
    s = minkowski_sum(a, a)
    assert all(tuple(2 * x for x in alpha) in s for alpha in a)


# ---------------------------------------------------------------- half-sets

def test_half_set_tensor_square():
    res = maximal_half_set(ball_set(2, math.inf, 2))
    assert res.size == 4 and res.unique
    assert set(res.theta) == {(0, 0), (1, 0), (0, 1), (1, 1)}


def test_half_set_non_unique():
    res = maximal_half_set(anova_set(2, 1, 2))
    assert res.size == 2 and not res.unique
    assert {frozenset(t) for t in res.maximal} == {frozenset({(0, 0), (1, 0)}), frozenset({(0, 0), (0, 1)})}


@pytest.mark.parametrize("d,k,L", [(2, 20, 66), (3, 20, 286), (4, 13, 210), (5, 10, 252), (10, 5, 66),
                                   (10, 2, 11)])
def test_half_set_table(d, k, L):
    assert maximal_half_set(total_degree_set(d, k)).size == L == math.comb(k // 2 + d, d)


def test_half_set_requires_downward_closed():
    with pytest.raises(NotDownwardClosedError):
        maximal_half_set(S((0, 0), (2, 0)))


@pytest.mark.parametrize("d,size,heur,with_L", [(2, 231, 77, 77), (10, 3003, 273, 273), (10, 66, 6, 11)])
def test_heuristic(d, size, heur, with_L):
    k = {231: 20, 3003: 5, 66: 2}[size]
    lam = total_degree_set(d, k)
    assert len(lam) == size
    assert heuristic_size(lam) == heur
    assert heuristic_size(lam, use_lower_bound=True) == with_L


@given(downward_closed_sets(max_dim=2, max_deg=4))
@settings(max_examples=80, deadline=None)
def test_half_set_matches_brute_force(lam):
    res = maximal_half_set(lam)
    assert res.size == brute_half_set_size(lam)
    assert 1 <= res.size <= len(lam)
    assert minkowski_sum(res.theta, res.theta).issubset(lam)
    for theta in res.maximal:
        assert len(theta) == res.size and theta.is_downward_closed()


@given(downward_closed_sets(max_dim=3, max_deg=3))
@settings(max_examples=60, deadline=None)
def test_convex_sets_have_floor_half(lam):
    if not is_convex(lam):
        return
    floor_half = MultiIndexSet.from_iterable({tuple(x // 2 for x in a) for a in lam}, dim=lam.dim)
    res = maximal_half_set(lam)
    assert res.unique and res.theta == floor_half


def test_anova_d20_half_set_fast():
    lam = anova_set(20, 2, 4)
    res = maximal_half_set(lam)
    assert res.exact and res.size == 41
    assert minkowski_sum(res.theta, res.theta).issubset(lam)
    assert heuristic_size(lam) == math.ceil(len(lam) / 21)
    assert np.isclose(len(lam), 1 + 20 * 4 + 190 * 6)
