import math

import numpy as np
import pytest

from riccicloud import (
    EuclideanField,
    ExactField,
    FieldError,
    PointCloud,
    SffField,
    Sphere,
    chord_expansion_check,
    corrected_distance,
    estimate_tangent_basis,
    fit_sff,
    make_field,
    validate_assumption_31,
)


@pytest.fixture(scope="module")
def sff_oracle_field(sphere, sphere_cloud_5k):
    return SffField(sphere_cloud_5k, h=0.25, ii_source="oracle", oracle=sphere)


@pytest.fixture(scope="module")
def sff_fit_field(sphere, sphere_cloud_5k):
    return SffField(sphere_cloud_5k, h=0.25, ii_source="fit", oracle=sphere)


def max_principal_angle(b_est, b_true):
    # sine-based: accurate near zero, unlike acos of a cosine close to 1
    resid = b_est - (b_est @ b_true.T) @ b_true
    s = np.linalg.svd(resid, compute_uv=False)
    return math.asin(min(1.0, s.max()))


def planar_cloud(n=40, seed=0, noise=0.0):
    rng = np.random.default_rng(seed)
    t = rng.uniform(-1, 1, size=(n, 2))
    basis = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    pts = t @ basis
    if noise:
        pts[:, 2] += noise * rng.standard_normal(n)
    return PointCloud(pts)


def test_field_symmetry_and_diagonal(sphere):
    cloud = sphere.sample_uniform(80, seed=2)
    for field in (ExactField(cloud, sphere), EuclideanField(cloud),
                  SffField(cloud, h=0.8, ii_source="oracle", oracle=sphere)):
        for i, j in [(0, 1), (3, 40), (7, 7), (79, 12)]:
            assert field.value(i, j) == field.value(j, i)
            assert field.value(i, i) == 0.0
        row = field.row(5)
        assert row[5] == 0.0
        assert np.all(row >= 0.0)


def test_exact_matches_oracle_bitwise(sphere):
    cloud = sphere.sample_uniform(30, seed=3)
    field = ExactField(cloud, sphere)
    for i in range(0, 30, 7):
        for j in range(30):
            assert field.value(i, j) == (
                0.0 if i == j else sphere.geodesic_distance(cloud.points[i], cloud.points[j])
            )


def test_euclidean_underestimates(sphere):
    cloud = sphere.sample_uniform(100, seed=4)
    chord = EuclideanField(cloud)
    geo = ExactField(cloud, sphere)
    for i in range(0, 100, 11):
        assert np.all(chord.row(i) <= geo.row(i) + 1e-15)


def test_tangent_basis_planar_exact():
    cloud = planar_cloud()
    basis = estimate_tangent_basis(cloud, 0, h=2.5, m=2)
    true = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    assert max_principal_angle(basis, true) <= 1e-8


def test_tangent_basis_minimal_neighborhood():
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.6, 0.7, 0.0]])
    basis = estimate_tangent_basis(PointCloud(pts), 0, h=3.0, m=2)
    assert basis.shape == (2, 3)


def test_tangent_basis_errors():
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 0.0, 0.0]])
    cloud = PointCloud(pts)
    with pytest.raises(FieldError, match="insufficient"):
        estimate_tangent_basis(cloud, 0, h=0.5, m=2)
    with pytest.raises(FieldError, match="ill-conditioned"):
        estimate_tangent_basis(cloud, 0, h=5.0, m=2)


def test_tangent_basis_sphere_accuracy(sphere, sphere_cloud_5k):
    rng = np.random.default_rng(6)
    idx = rng.choice(5000, size=300, replace=False)
    angles = []
    for i in idx:
        est = estimate_tangent_basis(sphere_cloud_5k, int(i), h=0.2, m=2)
        true = sphere.tangent_basis(sphere_cloud_5k.points[int(i)])
        angles.append(max_principal_angle(est, true))
    assert np.mean(np.asarray(angles) <= 0.05) >= 0.95


def test_fit_sff_flat_is_zero():
    cloud = planar_cloud(n=60, seed=1)
    basis = estimate_tangent_basis(cloud, 0, h=2.5, m=2)
    est = fit_sff(cloud, 0, h=2.5, basis=basis)
    assert np.abs(est.hessian).max() <= 1e-8
    w = np.array([0.6, 0.8])
    assert est.ii_norm_sq(w) <= 1e-16


def test_fit_sff_insufficient_and_singular():
    pts = np.vstack([np.zeros(3), np.eye(3)[:2] * 0.1])
    cloud = PointCloud(pts)
    basis = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    with pytest.raises(FieldError, match="insufficient"):
        fit_sff(cloud, 0, h=1.0, basis=basis)
    # six neighbors all on one line: quadratic design is rank deficient
    line = np.array([[0.1 * k, 0.0, 0.0] for k in range(1, 7)])
    cloud2 = PointCloud(np.vstack([np.zeros(3), line]))
    with pytest.raises(FieldError, match="singular"):
        fit_sff(cloud2, 0, h=1.0, basis=basis)


def test_fit_sff_sphere_unit_curvature(sphere, sphere_cloud_5k):
    rng = np.random.default_rng(8)
    idx = rng.choice(5000, size=200, replace=False)
    errs = []
    for i in idx:
        basis = estimate_tangent_basis(sphere_cloud_5k, int(i), h=0.25, m=2)
        est = fit_sff(sphere_cloud_5k, int(i), h=0.25, basis=basis)
        w = rng.standard_normal(2)
        w /= np.linalg.norm(w)
        errs.append(abs(math.sqrt(est.ii_norm_sq(w)) - 1.0))
    assert np.median(errs) <= 0.15


def test_fit_sff_radius_two(mocker=None):
    s2 = Sphere(2, 2.0)
    cloud = s2.sample_uniform(5000, seed=9)
    rng = np.random.default_rng(10)
    idx = rng.choice(5000, size=150, replace=False)
    norms = []
    for i in idx:
        basis = estimate_tangent_basis(cloud, int(i), h=0.25, m=2)
        est = fit_sff(cloud, int(i), h=0.25, basis=basis)
        w = rng.standard_normal(2)
        w /= np.linalg.norm(w)
        norms.append(math.sqrt(est.ii_norm_sq(w)))
    assert abs(np.median(norms) - 0.5) <= 0.15 * 0.5


def test_corrected_distance_examples(sphere, sff_oracle_field):
    field = sff_oracle_field
    assert field.value(4, 4) == 0.0
    # oracle-II correction reproduces the chord/arc relation to fourth order
    pts = field.cloud.points
    pairs = []
    for i in range(200):
        row = np.linalg.norm(pts - pts[i], axis=1)
        js = np.nonzero((row > 0.29) & (row < 0.31))[0]
        pairs.extend((i, int(j)) for j in js[:2])
    assert pairs
    worst = 0.0
    for i, j in pairs[:50]:
        chord = float(np.linalg.norm(pts[i] - pts[j]))
        expected_residual = 2.0 * math.asin(chord / 2.0) - (chord + chord**3 * 2.0 / 48.0)
        got = field.value(i, j)
        geo = sphere.geodesic_distance(pts[i], pts[j])
        assert got == pytest.approx(chord + chord**3 / 24.0, rel=1e-12)
        assert geo - got == pytest.approx(expected_residual, rel=1e-6)
        worst = max(worst, abs(geo - got))
    # frozen closed-form value at chord exactly 0.3 (spec example, recomputed)
    assert 2.0 * math.asin(0.15) - (0.3 + 0.3**3 * 2.0 / 48.0) == pytest.approx(
        1.1545553372072082e-05, rel=1e-9
    )
    assert worst <= 2e-5


def test_corrected_distance_flat_equals_euclidean():
    cloud = planar_cloud(n=80, seed=12)
    field = SffField(cloud, h=2.5, intrinsic_dim=2, ii_source="fit")
    eu = EuclideanField(cloud)
    for i, j in [(0, 1), (5, 40), (10, 70)]:
        assert field.value(i, j) == pytest.approx(eu.value(i, j), abs=1e-10)
    assert corrected_distance(field, 3, 3) == 0.0


def test_sff_beta_estimate_reported(sff_fit_field):
    assert isinstance(sff_fit_field.beta_estimate, float)
    assert 0.0 <= sff_fit_field.beta_estimate < 2.0


def test_chord_expansion_circle(circle):
    t = np.linspace(0.05, 0.4, 12)
    rep = chord_expansion_check(circle, t)
    # closed-form residual at t = 0.2 (leading term 3 t^5 / 640)
    at = chord_expansion_check(circle, np.array([0.2]))
    assert at["residual"][0] == pytest.approx(1.4964330816158444e-06, rel=1e-9)
    assert abs(at["residual"][0] - 1.5e-6) <= 0.2 * 1.5e-6
    assert rep["slope"] >= 4.5
    fine = chord_expansion_check(circle, np.linspace(0.02, 0.3, 15))
    assert np.all(np.diff(fine["residual"]) > 0)  # decreasing toward 0


def test_validate_assumption_31_exact(sphere):
    cloud = sphere.sample_uniform(300, seed=14)
    field = ExactField(cloud, sphere)
    rep = validate_assumption_31(field, sphere, eps=0.3, c=0.5, C=2.0)
    assert rep["max_scaled_error"] == 0.0
    assert rep["implication_violations"] == 0


def test_validate_assumption_31_euclidean_order_three(sphere):
    cloud = sphere.sample_uniform(1500, seed=15)
    field = EuclideanField(cloud)
    vals = []
    for eps in (0.3, 0.2):
        rep = validate_assumption_31(field, sphere, eps=eps, c=0.5, C=2.0)
        vals.append(rep["max_scaled_error"])
    # order-three error: the eps^3-scaled gap stays bounded away from zero
    assert all(v > 0.1 for v in vals)
    assert vals[0] == pytest.approx(1.0 / 3.0, rel=0.35)


def test_validate_assumption_31_sff_order_four(sphere, sphere_cloud_5k):
    slopes_x = []
    slopes_y = []
    for eps in (0.1, 0.2, 0.3):
        field = SffField(sphere_cloud_5k, h=4 * eps, ii_source="oracle", oracle=sphere)
        rep = validate_assumption_31(field, sphere, eps=eps, c=0.5, C=2.0)
        slopes_x.append(math.log(eps))
        slopes_y.append(math.log(rep["max_scaled_error"]))
    slope = np.polyfit(slopes_x, slopes_y, 1)[0]
    assert slope >= 0.8


def test_make_field_dispatch(sphere):
    cloud = sphere.sample_uniform(50, seed=16)
    assert make_field("exact", cloud, sphere).mode == "exact"
    assert make_field("euclidean", cloud).mode == "euclidean"
    assert make_field("sff", cloud, sphere, h=1.5).mode == "sff"
    with pytest.raises(FieldError):
        make_field("sff", cloud, sphere)
    with pytest.raises(FieldError):
        make_field("nope", cloud)


def test_sparse_csv_export(tmp_path, sphere):
    cloud = sphere.sample_uniform(20, seed=17)
    field = ExactField(cloud, sphere)
    path = tmp_path / "field.csv"
    field.export_sparse_csv(path, radius=0.8)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "i,j,value"
    for line in rows[1:]:
        i, j, v = line.split(",")
        assert int(i) < int(j)
        assert 0.0 < float(v) <= 0.8
