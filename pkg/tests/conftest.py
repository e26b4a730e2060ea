import numpy as np
import pytest

from riccicloud import (
    Circle,
    CliffordTorus,
    ExactField,
    GraphMetric,
    Sphere,
    build_rgg,
)


@pytest.fixture(scope="session")
def sphere():
    return Sphere(2, 1.0)


@pytest.fixture(scope="session")
def circle():
    return Circle(1.0)


@pytest.fixture(scope="session")
def torus():
    return CliffordTorus()


@pytest.fixture(scope="session")
def sphere_cloud_5k(sphere):
    return sphere.sample_uniform(5000, seed=11)


@pytest.fixture(scope="session")
def small_instance(sphere):
    """150-point sphere instance shared by the metric/curvature/heat checks."""
    cloud = sphere.sample_uniform(150, seed=5)
    field = ExactField(cloud, sphere)
    rgg = build_rgg(cloud, 0.6, field)
    metric = GraphMetric(rgg, c0=0.05, c1=2.2)
    return sphere, cloud, field, rgg, metric


def rand_measure(rng, max_support=6, id_pool=50):
    from riccicloud import DiscreteMeasure

    size = int(rng.integers(1, max_support + 1))
    support = rng.choice(id_pool, size=size, replace=False)
    masses = rng.integers(1, 9, size=size)
    return DiscreteMeasure(np.sort(support), masses[np.argsort(support)], int(masses.sum()))


def balanced_pair(rng, max_support=6, id_pool=50):
    """Two integer-mass measures with equal totals (random compositions)."""
    from riccicloud import DiscreteMeasure

    sa = int(rng.integers(1, max_support + 1))
    sb = int(rng.integers(1, max_support + 1))
    total = int(rng.integers(max(sa, sb), 3 * max(sa, sb) + 1))

    def compose(size):
        cuts = np.sort(rng.choice(np.arange(1, total), size=size - 1, replace=False)) if size > 1 else np.array([], dtype=int)
        parts = np.diff(np.concatenate([[0], cuts, [total]]))
        support = np.sort(rng.choice(id_pool, size=size, replace=False))
        return DiscreteMeasure(support, parts, total)

    a = compose(sa)
    b = compose(sb)
    assert a.total == b.total == 1
    return a, b
