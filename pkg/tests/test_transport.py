import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riccicloud import (
    DiscreteMeasure,
    TransportError,
    bottleneck_matching,
    bottleneck_matching_points,
    estimate_w_infty_empirical,
    splitting_check,
    w1_brute,
    w1_exact,
    w_infty_rate,
)
from riccicloud.transport import bottleneck_brute, cancel_common_mass, w1_monotone_line

from conftest import balanced_pair


def exact_plan_cost(plan, cost_matrix) -> Fraction:
    total = Fraction(0)
    for i, j, k in plan.entries:
        total += Fraction(k, plan.denominator) * Fraction(float(cost_matrix[i, j]))
    return total


def test_identical_measures_zero():
    mu = DiscreteMeasure.uniform([1, 2, 3])
    cost = np.array([[0.0, 1, 2], [1, 0, 1], [2, 1, 0.0]])
    plan = w1_exact(mu, mu, cost)
    assert plan.cost == 0.0
    assert plan.duality_gap() <= 1e-12
    assert plan.marginal_residuals(mu, mu) == (0, 0)


def test_singletons():
    mu = DiscreteMeasure.uniform([0])
    nu = DiscreteMeasure.uniform([1])
    plan = w1_exact(mu, nu, np.array([[3.5]]))
    assert plan.cost == 3.5


def test_spec_example_masses():
    mu = DiscreteMeasure(np.array([0, 1, 2]), np.array([2, 1, 1]), 4)  # (1/2, 1/4, 1/4)
    nu = DiscreteMeasure.uniform([3, 4, 5])
    rng = np.random.default_rng(0)
    cost = rng.integers(0, 10, size=(3, 3)).astype(float)
    plan = w1_exact(mu, nu, cost)
    assert exact_plan_cost(plan, cost) == w1_brute(mu, nu, cost)


def test_brute_2x2_diagonal():
    mu = DiscreteMeasure.uniform([0, 1])
    nu = DiscreteMeasure.uniform([2, 3])
    cost = np.array([[1.0, 2.0], [2.0, 1.0]])
    assert w1_brute(mu, nu, cost) == Fraction(1)
    assert w1_exact(mu, nu, cost).cost == pytest.approx(1.0, abs=1e-12)


def test_randomized_exact_vs_brute():
    rng = np.random.default_rng(42)
    for _ in range(60):
        mu, nu = balanced_pair(rng)
        cost = rng.integers(0, 10, size=(mu.size, nu.size)).astype(float)
        plan = w1_exact(mu, nu, cost)
        assert plan.duality_gap() <= 1e-9
        assert plan.slackness_violation(cost) <= 1e-9
        assert plan.marginal_residuals(mu, nu) == (0, 0)
        assert exact_plan_cost(plan, cost) == w1_brute(mu, nu, cost)


def test_float_costs_exact_vs_brute():
    rng = np.random.default_rng(7)
    for _ in range(40):
        mu, nu = balanced_pair(rng, max_support=5)
        cost = rng.uniform(0.0, 3.0, size=(mu.size, nu.size))
        plan = w1_exact(mu, nu, cost)
        brute = w1_brute(mu, nu, cost)
        assert abs(float(exact_plan_cost(plan, cost) - brute)) <= 1e-12
        assert plan.duality_gap() <= 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_property_exact_matches_brute(seed):
    rng = np.random.default_rng(seed)
    mu, nu = balanced_pair(rng, max_support=4, id_pool=12)
    cost = rng.integers(0, 7, size=(mu.size, nu.size)).astype(float)
    plan = w1_exact(mu, nu, cost)
    assert exact_plan_cost(plan, cost) == w1_brute(mu, nu, cost)
    assert plan.duality_gap() <= 1e-9


def test_mass_mismatch_raises():
    mu = DiscreteMeasure.uniform([0, 1])
    nu = DiscreteMeasure.uniform([2, 3, 4])
    nu = DiscreteMeasure(nu.support, nu.numerators, 4)  # total 3/4 != 1
    with pytest.raises(TransportError, match="mass mismatch"):
        w1_exact(mu, nu, np.zeros((2, 3)))


def test_disconnected_cost_raises():
    mu = DiscreteMeasure.uniform([0])
    nu = DiscreteMeasure.uniform([1])
    with pytest.raises(TransportError, match="disconnected"):
        w1_exact(mu, nu, np.array([[np.inf]]))


def test_brute_size_gate():
    mu = DiscreteMeasure.uniform(np.arange(8))
    nu = DiscreteMeasure.uniform(np.arange(8, 16))
    with pytest.raises(TransportError, match="too large"):
        w1_brute(mu, nu, np.zeros((8, 8)))


def test_cancel_common_mass_preserves_w1():
    rng = np.random.default_rng(3)
    ids = np.arange(10)
    pts = rng.uniform(0, 1, size=10)
    cost_full = np.abs(pts[:, None] - pts[None, :])

    def cost_fn(a, b):
        return cost_full[a, b]

    for _ in range(30):
        sa = np.sort(rng.choice(ids, size=rng.integers(2, 6), replace=False))
        sb = np.sort(rng.choice(ids, size=rng.integers(2, 6), replace=False))
        mu = DiscreteMeasure.uniform(sa)
        nu = DiscreteMeasure.uniform(sb)
        full = w1_exact(mu, nu, cost_full[np.ix_(sa, sb)]).cost
        rmu, rnu = cancel_common_mass(mu, nu)
        if rmu is None:
            assert full <= 1e-12
        else:
            red = w1_exact(rmu, rnu, cost_full[np.ix_(rmu.support, rnu.support)]).cost
            assert red == pytest.approx(full, abs=1e-10)


def test_monotone_line_matches_exact():
    rng = np.random.default_rng(5)
    for _ in range(30):
        mu, nu = balanced_pair(rng, max_support=6, id_pool=40)
        px = rng.uniform(-1, 1, size=mu.size)
        py = rng.uniform(-1, 1, size=nu.size)
        cost = np.abs(px[:, None] - py[None, :])
        assert float(w1_monotone_line(px, mu, py, nu)) == pytest.approx(
            w1_exact(mu, nu, cost).cost, abs=1e-10
        )


def test_monotone_line_with_bent_cost_on_disjoint_supports():
    # convex bent hop cost, disjoint supports: monotone matching stays optimal
    delta0 = 0.1

    def h(t):
        u = t / delta0
        return t + delta0 * (0.25 * max(0.0, 1.0 - u) ** 3)

    rng = np.random.default_rng(9)
    for _ in range(25):
        mu, nu = balanced_pair(rng, max_support=5, id_pool=30)
        px = rng.uniform(-1, 0, size=mu.size)  # disjoint position ranges
        py = rng.uniform(0.001, 1, size=nu.size)
        cost = np.array([[h(abs(a - b)) for b in py] for a in px])
        assert float(w1_monotone_line(px, mu, py, nu, h=h)) == pytest.approx(
            w1_exact(mu, nu, cost).cost, abs=1e-10
        )


def test_splitting_lemma():
    rng = np.random.default_rng(13)
    pts = rng.uniform(0, 1, size=(60, 2))

    def cost(a, b):
        return float(np.linalg.norm(pts[a] - pts[b]))

    for _ in range(40):
        m1, n1 = balanced_pair(rng, max_support=5, id_pool=30)
        m2, n2 = balanced_pair(rng, max_support=5, id_pool=30)
        assert splitting_check(m1, m2, n1, n2, cost)


def test_splitting_equal_second_pair_reduces_to_first():
    rng = np.random.default_rng(15)
    m1, n1 = balanced_pair(rng, max_support=4, id_pool=20)
    m2 = DiscreteMeasure.uniform([40, 41])
    pts = rng.uniform(0, 1, size=50)

    def cost(a, b):
        return abs(float(pts[a] - pts[b]))

    w_first = w1_exact(m1, n1, np.array([[cost(a, b) for b in n1.support] for a in m1.support])).cost
    left = w1_exact(m1 + m2, n1 + m2, cost).cost
    assert left <= w_first + 1e-9


def test_bottleneck_trivial_and_line():
    c = np.zeros((3, 3))
    v, match = bottleneck_matching(c)
    assert v == 0.0 and len(match) == 3
    v2, match2 = bottleneck_matching_points(
        [0.0, 1.0], [0.1, 0.9], lambda a, b: abs(a - b)
    )
    assert v2 == pytest.approx(0.1, abs=1e-15)
    assert sorted(match2) == [(0, 0), (1, 1)]


def test_bottleneck_matches_brute():
    rng = np.random.default_rng(21)
    for _ in range(40):
        c = rng.uniform(0, 1, size=(6, 6))
        v, match = bottleneck_matching(c)
        assert v == pytest.approx(bottleneck_brute(c), abs=0.0)
        cols = sorted(j for _, j in match)
        assert cols == list(range(6))
        assert max(c[i, j] for i, j in match) == pytest.approx(v, abs=0.0)


def test_bottleneck_size_mismatch():
    with pytest.raises(TransportError, match="size mismatch"):
        bottleneck_matching_points([0.0], [0.0, 1.0], lambda a, b: 0.0)


def test_bottleneck_offset_point_monotone():
    rng = np.random.default_rng(2)
    c = rng.uniform(0, 1, size=(5, 5))
    v, _ = bottleneck_matching(c)
    grown = np.zeros((6, 6))
    grown[:5, :5] = c
    grown[5, :5] = 2.0
    grown[:5, 5] = 2.0
    grown[5, 5] = 0.0
    v2, _ = bottleneck_matching(grown)
    assert v2 == pytest.approx(v, abs=0.0)


def test_w_infty_rate_clauses():
    assert w_infty_rate(1000, 1) == pytest.approx(math.sqrt(math.log(1000) / 1000), rel=1e-12)
    assert w_infty_rate(1000, 2) == pytest.approx(math.log(1000) ** 0.75 / math.sqrt(1000), rel=1e-12)
    assert w_infty_rate(1000, 3) == pytest.approx(math.log(1000) ** (1 / 3) / 1000 ** (1 / 3), rel=1e-12)


def test_w_infty_proxy_zero_for_identical_sample(sphere):
    cloud = sphere.sample_uniform(500, seed=123)
    rep = estimate_w_infty_empirical(cloud, sphere, 500, seed=123)
    assert rep["proxy"] == 0.0


def test_w_infty_proxy_sphere_scale(sphere):
    cloud = sphere.sample_uniform(2000, seed=1)
    rep = estimate_w_infty_empirical(cloud, sphere, 10000, seed=2)
    assert 0.0 < rep["proxy"] < 0.25


def test_w_infty_proxy_circle_gap(circle):
    cloud = circle.sample_uniform(1000, seed=4)
    theta = np.sort(np.mod(circle.angles(cloud.points), 2 * math.pi))
    gaps = np.diff(np.concatenate([theta, theta[:1] + 2 * math.pi]))
    half_gap = gaps.max() / 2
    rep = estimate_w_infty_empirical(cloud, circle, 20000, seed=5)
    assert rep["proxy"] <= 3 * half_gap
    assert rep["proxy"] >= half_gap / 3
