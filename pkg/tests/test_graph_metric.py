import math

import numpy as np
import pytest

from riccicloud import (
    Circle,
    ExactField,
    EuclideanField,
    GraphMetric,
    MetricError,
    PointCloud,
    build_rgg,
    compare_metrics,
    default_profile,
)
from riccicloud.graph_metric import ProfileFn, adjacent_pair_set


def circle_line_instance(spacings, eps=1.0, **metric_kw):
    """Points on a line (flat 'circle'); Euclidean field equals arc distance."""
    pos = np.concatenate([[0.0], np.cumsum(spacings)])
    pts = np.stack([pos, np.zeros_like(pos)], axis=1)
    cloud = PointCloud(pts)
    rgg = build_rgg(cloud, eps, EuclideanField(cloud))
    return rgg, GraphMetric(rgg, **metric_kw)


def test_default_profile_values():
    psi = default_profile()
    assert psi.psi0 == 0.25
    assert psi.psip0 == 0.25
    assert float(psi.psi(0.0)) == 0.25
    assert float(psi.psi(0.5)) == pytest.approx(0.53125, abs=0.0)
    assert float(psi.psi(2.0)) == 2.0
    psi.check_admissible()


def test_profile_rejects_bad():
    bad = ProfileFn(bend=lambda t: -np.minimum(t, 1.0), psi0=0.0, psip0=0.0)
    with pytest.raises(MetricError):
        bad.check_admissible()


def test_regime_flag():
    pts = np.stack([np.linspace(0, 1, 5), np.zeros(5)], axis=1)
    cloud = PointCloud(pts)
    rgg = build_rgg(cloud, 0.5, EuclideanField(cloud))
    assert GraphMetric(rgg, c0=0.05, c1=2.2).regime_ok  # equality case holds
    assert not GraphMetric(rgg, c0=0.05, c1=2.0).regime_ok
    fig2 = GraphMetric(rgg, delta0=0.005, delta1=0.01)
    assert not fig2.regime_ok
    assert fig2.delta0 == 0.005 and fig2.delta1 == 0.01


def test_pre_distance_cases():
    rgg, metric = circle_line_instance([0.3, 0.3, 5.0], eps=1.0, c0=0.2, c1=1.0)
    d0 = metric.delta0  # 0.2
    assert metric.pre_distance(0, 0) == 0.0
    # identity branch: field = 0.3 >= delta0 -> exactly the field value
    assert metric.pre_distance(0, 1) == 0.3
    assert metric.pre_distance(1, 2) == 0.3
    # beyond delta1: unreachable in one hop
    assert metric.pre_distance(2, 3) == math.inf
    # bent branch value: field = 0.1 delta0 -> delta0 (0.25 * 0.9^3 + 0.1)
    rgg2, metric2 = circle_line_instance([0.02], eps=1.0, c0=0.2, c1=1.0)
    expected = 0.2 * (0.25 * 0.9**3 + 0.1)
    assert metric2.pre_distance(0, 1) == pytest.approx(expected, rel=1e-15)
    assert metric2.pre_distance(0, 1) >= 0.02  # float-safe lower bound


def test_pre_distance_identity_at_delta1():
    rgg, metric = circle_line_instance([1.0], eps=1.0, c0=0.05, c1=1.0)
    d, path = metric.shortest_path_distance(0, 1)
    assert d == 1.0  # single hop at field = delta1, psi identity
    assert path == [0, 1]


def test_two_hop_route():
    # direct pre-distance infinite, two hops of 0.6*delta1 each
    rgg, metric = circle_line_instance([0.6, 0.6], eps=1.0, c0=0.05, c1=1.0)
    d, path = metric.shortest_path_distance(0, 2)
    assert d == pytest.approx(1.2, rel=1e-15)
    assert path == [0, 1, 2]
    assert metric.pre_distance(0, 2) == math.inf


def test_identity_of_indiscernibles_and_symmetry():
    rgg, metric = circle_line_instance([0.4, 0.4, 0.4], eps=1.0)
    assert metric.distance(2, 2) == 0.0
    d_ab, path_ab = metric.shortest_path_distance(0, 3)
    d_ba, path_ba = metric.shortest_path_distance(3, 0)
    assert d_ab == d_ba  # canonical orientation: exact
    assert path_ab == path_ba[::-1]
    assert d_ab > 0


def test_disconnected_raises():
    rgg, metric = circle_line_instance([0.4, 50.0], eps=1.0, c0=0.05, c1=1.0)
    with pytest.raises(MetricError, match="disconnected"):
        metric.distance(0, 2)


def test_metric_axioms_sphere_200(sphere):
    cloud = sphere.sample_uniform(200, seed=10)
    rgg = build_rgg(cloud, 0.5, ExactField(cloud, sphere))
    metric = GraphMetric(rgg, c0=0.05, c1=2.2)
    d = metric.all_pairs()
    assert np.all(np.isfinite(d))
    assert np.array_equal(np.diag(d), np.zeros(200))
    assert d[np.triu_indices(200, 1)].min() > 0
    assert np.abs(d - d.T).max() <= 1e-15  # scipy rows; canonical API is exact
    tri = d[:, :, None] + d[None, :, :] - d[:, None, :]
    assert tri.min() >= -1e-12


def test_lemma_witness_hops(sphere):
    cloud = sphere.sample_uniform(200, seed=10)
    rgg = build_rgg(cloud, 0.5, ExactField(cloud, sphere))
    metric = GraphMetric(rgg, c0=0.05, c1=2.2)
    rng = np.random.default_rng(0)
    for _ in range(25):
        i, j = rng.integers(0, 200, 2)
        if i == j:
            continue
        d, path = metric.shortest_path_distance(int(i), int(j))
        hops = list(zip(path[:-1], path[1:]))
        total = 0.0
        for a, b in hops:
            pre = metric.pre_distance(a, b)
            assert pre <= metric.delta1
            d_hop, _ = metric.shortest_path_distance(a, b)
            assert d_hop == pre  # each hop realizes its pre-distance exactly
            total += pre
        assert total == pytest.approx(d, rel=1e-12)


def test_monotone_in_delta1(sphere):
    cloud = sphere.sample_uniform(150, seed=11)
    rgg = build_rgg(cloud, 0.5, ExactField(cloud, sphere))
    small = GraphMetric(rgg, c0=0.05, c1=1.5)
    large = GraphMetric(rgg, c0=0.05, c1=2.5)
    ds = small.all_pairs()
    dl = large.all_pairs()
    assert np.all(dl <= ds + 1e-15)


def test_dg_bounded_by_pre(sphere):
    cloud = sphere.sample_uniform(150, seed=11)
    rgg = build_rgg(cloud, 0.5, ExactField(cloud, sphere))
    metric = GraphMetric(rgg, c0=0.05, c1=2.2)
    g = metric.hop_graph().tocoo()
    d = metric.all_pairs()
    assert np.all(d[g.row, g.col] <= g.data)


def test_single_hop_optimal_for_metric_fields(sphere):
    # psi' <= 1 on [0,1] plus the triangle inequality make the direct hop
    # optimal whenever it exists; Dijkstra must return the pre-distance.
    cloud = sphere.sample_uniform(200, seed=12)
    rgg = build_rgg(cloud, 0.5, ExactField(cloud, sphere))
    metric = GraphMetric(rgg, c0=0.05, c1=2.2)
    g = metric.hop_graph().tocoo()
    d = metric.all_pairs()
    assert np.array_equal(d[g.row, g.col], g.data)


def test_compare_metrics_exact_zero_violations(sphere):
    cloud = sphere.sample_uniform(300, seed=13)
    rgg = build_rgg(cloud, 0.5, ExactField(cloud, sphere))
    metric = GraphMetric(rgg, c0=0.05, c1=2.2)
    rng = np.random.default_rng(3)
    pairs = [(int(a), int(b)) for a, b in rng.integers(0, 300, size=(1000, 2)) if a != b]
    rep = compare_metrics(metric, sphere, pairs)
    assert rep.lower_violations == 0
    assert rep.window_upper_violations == 0
    # window pairs are pinched: d_G == d_M there
    assert rep.worst_window_ratio <= 0.0 + 1e-15


def test_compare_metrics_euclidean_slack(sphere):
    cloud = sphere.sample_uniform(800, seed=14)
    worst = {}
    for eps in (0.25, 0.5):
        rgg = build_rgg(cloud, eps, EuclideanField(cloud))
        metric = GraphMetric(rgg, c0=0.05, c1=2.2)
        pairs = []
        d = sphere.pairwise_geodesic(cloud.points[:200], cloud.points)
        ii, jj = np.nonzero((d >= 2 * metric.delta0) & (d <= 0.5 * metric.delta1))
        rng = np.random.default_rng(0)
        sel = rng.choice(ii.size, 300, replace=False)
        pairs = list(zip(ii[sel], jj[sel]))
        rep = compare_metrics(metric, sphere, pairs)
        worst[eps] = rep.worst_lower_ratio
        assert rep.worst_lower_ratio > 0  # chords cut corners: d_M exceeds d_G
    # slack shrinks at eps^2..eps^3 scale as eps decreases
    assert worst[0.25] < worst[0.5]
    assert worst[0.5] <= 0.5**2  # comfortably below the eps^2 scale at eps=0.5


def test_adjacent_pairs_basic():
    rgg, metric = circle_line_instance([0.4, 0.4, 0.4], eps=1.0, c0=0.05, c1=1.0)
    pairs = adjacent_pair_set(metric)
    assert (0, 1) in pairs and (1, 2) in pairs and (2, 3) in pairs
    # two identity-branch hops tie the direct hop exactly, so (0, 2) stays
    # adjacent (d_G equals its pre-distance), while 1.2 > delta1 does not
    assert (0, 2) in pairs
    assert (0, 3) not in pairs
    # edgeless graph -> empty set
    rgg2, metric2 = circle_line_instance([5.0], eps=1.0, c0=0.05, c1=0.5)
    assert adjacent_pair_set(metric2) == []


def test_adjacent_pairs_circle_consecutive(circle):
    cloud = circle.sample_uniform(200, seed=15)
    rgg = build_rgg(cloud, 0.3, ExactField(cloud, circle))
    metric = GraphMetric(rgg, c0=0.05, c1=2.2)
    pairs = set(adjacent_pair_set(metric))
    theta = np.mod(circle.angles(cloud.points), 2 * math.pi)
    order = np.argsort(theta)
    for k in range(200):
        a, b = int(order[k]), int(order[(k + 1) % 200])
        gap = circle.geodesic_distance(cloud.points[a], cloud.points[b])
        if 0 < gap <= metric.delta1:
            assert (min(a, b), max(a, b)) in pairs
