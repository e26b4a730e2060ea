"""Pairwise distance fields over a point cloud.

Three modes: exact oracle geodesics, raw Euclidean chords, and the
second-fundamental-form-corrected estimator

    d_hat(x, y) = |x - y| + (|II_xy|^2 + |II_yx|^2) |x - y|^3 / 48,

whose curvature data comes either from local PCA + quadratic fits or from the
oracle. All fields are symmetric, nonnegative, and vanish exactly on the
diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .manifolds import GeometryError, PointCloud


class FieldError(ValueError):
    pass


class DistanceField:
    """Symmetric pairwise evaluator. Subclasses implement `row`."""

    mode = "abstract"
    is_metric = False  # True when values satisfy the triangle inequality

    def __init__(self, cloud: PointCloud):
        self.cloud = cloud
        self._cache: dict[tuple[int, int], float] = {}

    @property
    def n(self) -> int:
        return self.cloud.n

    def row(self, i: int) -> np.ndarray:
        raise NotImplementedError

    def value(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        key = (i, j) if i < j else (j, i)
        v = self._cache.get(key)
        if v is None:
            v = float(self.row(key[0])[key[1]])
            self._cache[key] = v
        return v

    def rows(self, indices) -> np.ndarray:
        return np.stack([self.row(int(i)) for i in np.asarray(indices, dtype=int)])

    def submatrix(self, I, J) -> np.ndarray:
        J = np.asarray(J, dtype=int)
        return self.rows(I)[:, J]

    def export_sparse_csv(self, path, radius: float) -> None:
        """Rows `i,j,value` (i<j) for all pairs with value <= radius."""
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "value"])
            for i in range(self.n):
                vals = self.row(i)
                for j in np.nonzero(vals[i + 1 :] <= radius)[0] + i + 1:
                    writer.writerow([i, int(j), f"{vals[j]:.17g}"])


class ExactField(DistanceField):
    """Oracle geodesic distances (the w_eps,M setting)."""

    mode = "exact"
    is_metric = True

    def __init__(self, cloud: PointCloud, oracle=None):
        super().__init__(cloud)
        self.oracle = oracle if oracle is not None else cloud.oracle
        if self.oracle is None:
            raise FieldError("exact field needs a manifold oracle")

    def row(self, i: int) -> np.ndarray:
        out = self.oracle.pairwise_geodesic(self.cloud.points[i : i + 1], self.cloud.points)[0]
        out[i] = 0.0
        return out

    def value(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        a, b = (i, j) if i < j else (j, i)
        return self.oracle.geodesic_distance(self.cloud.points[a], self.cloud.points[b])

    def to_points(self, base_point) -> np.ndarray:
        """Distances from an arbitrary manifold point to the cloud."""
        base = np.asarray(base_point, dtype=float)
        return self.oracle.pairwise_geodesic(base[None, :], self.cloud.points)[0]


class EuclideanField(DistanceField):
    """Ambient chord lengths; underestimates the geodesic distance."""

    mode = "euclidean"
    is_metric = True

    def row(self, i: int) -> np.ndarray:
        diff = self.cloud.points - self.cloud.points[i]
        out = np.linalg.norm(diff, axis=1)
        out[i] = 0.0
        return out


@dataclass
class SffEstimate:
    """Local quadratic model at one base vertex."""

    base_index: int
    tangent_basis: np.ndarray  # (m, d) orthonormal rows
    hessian: np.ndarray  # (m, m, d) symmetric in the first two axes
    neighborhood_size: int

    def ii_vector(self, w) -> np.ndarray:
        """II(w, w) for unit tangent coordinates w (length m), an ambient vector."""
        w = np.asarray(w, dtype=float)
        return np.einsum("p,q,pqk->k", w, w, self.hessian)

    def ii_norm_sq(self, w) -> float:
        v = self.ii_vector(w)
        return float(v @ v)


def estimate_tangent_basis(cloud: PointCloud, i: int, h: float, m: int) -> np.ndarray:
    """Top-m principal directions of the neighbor differences around x_i."""
    diffs, _ = _neighbor_diffs(cloud, i, h)
    if diffs.shape[0] < m + 1:
        raise FieldError("insufficient neighborhood")
    cov = diffs.T @ diffs / diffs.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    evals = evals[::-1]
    evecs = evecs[:, ::-1]
    if cloud.ambient_dim > m and evals[m - 1] - evals[m] < 1e-12:
        raise FieldError("ill-conditioned tangent")
    return np.ascontiguousarray(evecs[:, :m].T)


def _neighbor_diffs(cloud: PointCloud, i: int, h: float):
    diff = cloud.points - cloud.points[i]
    dist = np.linalg.norm(diff, axis=1)
    mask = (dist <= h) & (dist > 0)
    return diff[mask], np.nonzero(mask)[0]


def _quad_columns(t: np.ndarray) -> np.ndarray:
    """Design columns [1, t_p, t_p t_q (p<=q)] for tangent coordinates t."""
    k, m = t.shape
    cols = [np.ones(k)]
    cols.extend(t[:, p] for p in range(m))
    for p in range(m):
        for q in range(p, m):
            cols.append(t[:, p] * t[:, q])
    return np.stack(cols, axis=1)


def fit_sff(cloud: PointCloud, i: int, h: float, basis: np.ndarray) -> SffEstimate:
    """Least-squares quadratic fit of normal coordinates over the h-neighborhood.

    The quadratic coefficients give the Hessian of the local graph map, i.e.
    the second-fundamental-form estimate; weights are the hard indicator of
    the h-ball.
    """
    m, d = basis.shape
    need = m * (m + 1) // 2 + m + 1
    diffs, _ = _neighbor_diffs(cloud, i, h)
    if diffs.shape[0] < need:
        raise FieldError("insufficient neighborhood")
    t = diffs @ basis.T  # (k, m) tangent coordinates
    normal = diffs - t @ basis  # (k, d) normal components in ambient coordinates
    design = _quad_columns(t)
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise FieldError("singular fit")
    coef, *_ = np.linalg.lstsq(design, normal, rcond=None)
    hess = np.zeros((m, m, d))
    idx = 1 + m
    for p in range(m):
        for q in range(p, m):
            if p == q:
                hess[p, p] = 2.0 * coef[idx]
            else:
                hess[p, q] = coef[idx]
                hess[q, p] = coef[idx]
            idx += 1
    return SffEstimate(i, basis, hess, diffs.shape[0])


class SffField(DistanceField):
    """Corrected distances d_hat from fitted (or oracle) second fundamental forms.

    Exactly symmetric by construction: the cubic correction sums the two
    one-sided curvature magnitudes.
    """

    mode = "sff"
    is_metric = False

    def __init__(
        self,
        cloud: PointCloud,
        h: float,
        intrinsic_dim: int | None = None,
        ii_source: str = "fit",
        oracle=None,
    ):
        super().__init__(cloud)
        self.h = float(h)
        oracle = oracle if oracle is not None else cloud.oracle
        if intrinsic_dim is None:
            if oracle is None:
                raise FieldError("need intrinsic_dim or an oracle")
            intrinsic_dim = oracle.intrinsic_dim
        self.m = int(intrinsic_dim)
        if ii_source not in ("fit", "oracle"):
            raise FieldError("ii_source must be 'fit' or 'oracle'")
        if ii_source == "oracle" and oracle is None:
            raise FieldError("oracle ii_source needs an oracle")
        self.ii_source = ii_source
        self.oracle = oracle
        self._bases = np.empty((self.n, self.m, cloud.ambient_dim))
        self._hessians = np.empty((self.n, self.m, self.m, cloud.ambient_dim))
        self.beta_estimate: float | str = "unknown"
        self._build()

    def _build(self):
        n = self.n
        for i in range(n):
            if self.ii_source == "oracle":
                basis = self.oracle.tangent_basis(self.cloud.points[i])
                hess = self._oracle_hessian(i, basis)
            else:
                basis = estimate_tangent_basis(self.cloud, i, self.h, self.m)
                hess = fit_sff(self.cloud, i, self.h, basis).hessian
            self._bases[i] = basis
            self._hessians[i] = hess
        if self.oracle is not None and self.ii_source == "fit":
            self.beta_estimate = self._estimate_beta()

    def _oracle_hessian(self, i: int, basis: np.ndarray) -> np.ndarray:
        """Exact II in the given tangent frame via polarization of II(v, v)."""
        x = self.cloud.points[i]
        m = self.m
        hess = np.empty((m, m, self.cloud.ambient_dim))
        iiv = [self.oracle.second_fundamental_form(x, basis[p]) for p in range(m)]
        for p in range(m):
            hess[p, p] = iiv[p]
        for p in range(m):
            for q in range(p + 1, m):
                vpq = (basis[p] + basis[q]) / math.sqrt(2.0)
                cross = self.oracle.second_fundamental_form(x, vpq) - 0.5 * (iiv[p] + iiv[q])
                hess[p, q] = cross
                hess[q, p] = cross
        return hess

    def _estimate_beta(self, sample: int = 200, seed: int = 0) -> float:
        """Max relative error of |II_hat(w,w)|^2 against the oracle on random
        held-out base points and directions."""
        rng = np.random.default_rng(seed)
        idx = rng.choice(self.n, size=min(sample, self.n), replace=False)
        worst = 0.0
        for i in idx:
            w = rng.standard_normal(self.m)
            w /= np.linalg.norm(w)
            est = SffEstimate(i, self._bases[i], self._hessians[i], 0).ii_norm_sq(w)
            v_amb = w @ self._bases[i]
            v_amb /= np.linalg.norm(v_amb)
            true_vec = self.oracle.second_fundamental_form(self.cloud.points[i], v_amb)
            true = float(true_vec @ true_vec)
            if true > 1e-12:
                worst = max(worst, abs(est - true) / true)
        return worst

    def estimate_at(self, i: int) -> SffEstimate:
        return SffEstimate(int(i), self._bases[i], self._hessians[i], 0)

    def _ii_sq_toward(self, i: int, diffs: np.ndarray) -> np.ndarray:
        """|II_i(w, w)|^2 for w = unit tangent projection of each ambient chord."""
        t = diffs @ self._bases[i].T  # (k, m)
        norms = np.linalg.norm(t, axis=1)
        safe = np.where(norms > 0, norms, 1.0)
        w = t / safe[:, None]
        vec = np.einsum("kp,kq,pqc->kc", w, w, self._hessians[i])
        out = np.einsum("kc,kc->k", vec, vec)
        out[norms == 0] = 0.0
        return out

    @staticmethod
    def _ii_sq_batch(bases: np.ndarray, hessians: np.ndarray, diffs: np.ndarray) -> np.ndarray:
        """|II_j(w_j, w_j)|^2 with per-row frames; w_j = unit projection of diffs[j]."""
        t = np.einsum("jmd,jd->jm", bases, diffs)
        norms = np.linalg.norm(t, axis=1)
        safe = np.where(norms > 0, norms, 1.0)
        w = t / safe[:, None]
        vec = np.einsum("jp,jq,jpqc->jc", w, w, hessians)
        out = np.einsum("jc,jc->j", vec, vec)
        out[norms == 0] = 0.0
        return out

    def row(self, i: int) -> np.ndarray:
        return self.values(i, np.arange(self.n))

    def values(self, i: int, J) -> np.ndarray:
        """d_hat(i, j) for j in J, fully vectorized in j."""
        J = np.asarray(J, dtype=int)
        diff = self.cloud.points[J] - self.cloud.points[i]
        chord = np.linalg.norm(diff, axis=1)
        a_fwd = self._ii_sq_toward(i, diff)
        a_bwd = self._ii_sq_batch(self._bases[J], self._hessians[J], -diff)
        out = chord + (a_fwd + a_bwd) * chord**3 / 48.0
        out[J == i] = 0.0
        return out

    def value(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        a, b = (i, j) if i < j else (j, i)
        return float(self.values(a, np.array([b]))[0])


def corrected_distance(field: SffField, i: int, j: int) -> float:
    """Single corrected-distance evaluation (propagates fit errors)."""
    if not isinstance(field, SffField):
        raise FieldError("corrected_distance needs an sff-mode field")
    return field.value(i, j)


def chord_expansion_check(oracle, t_grid) -> dict:
    """Residuals |t - (chord + chord^3 |gamma''|^2 / 24)| on a circle, with the
    log-log slope of residual vs t."""
    t = np.asarray(t_grid, dtype=float)
    if np.any(t <= 0) or np.any(t >= oracle.injectivity_radius):
        raise GeometryError("t grid must lie in (0, injectivity radius)")
    r = oracle.radius
    chord = 2.0 * r * np.sin(t / (2.0 * r))
    accel_sq = 1.0 / r**2
    corrected = chord + chord**3 * accel_sq / 24.0
    residual = np.abs(t - corrected)
    if t.size >= 2:
        slope = float(np.polyfit(np.log(t), np.log(residual), 1)[0])
    else:
        slope = float("nan")
    return {"t": t, "chord": chord, "corrected": corrected, "residual": residual, "slope": slope}


def validate_assumption_31(field: DistanceField, oracle, eps: float, c: float, C: float) -> dict:
    """Scaled local error and small-scale implication counts for a field.

    Over pairs with c*eps <= d_M <= C*eps or c*eps <= field <= C*eps, reports
    max |d_M - field| / eps^3; counts violations of
    field(x,y) <= c*eps  =>  d_M(x,y) <= (4/3) c eps.
    """
    pts = field.cloud.points
    n = field.cloud.n
    max_scaled = 0.0
    violations = 0
    pairs = 0
    for i in range(n):
        dm = oracle.pairwise_geodesic(pts[i : i + 1], pts)[0]
        fv = field.row(i)
        upper = np.arange(n) > i
        window = upper & ((dm >= c * eps) & (dm <= C * eps) | (fv >= c * eps) & (fv <= C * eps))
        if window.any():
            max_scaled = max(max_scaled, float(np.abs(dm[window] - fv[window]).max()) / eps**3)
            pairs += int(window.sum())
        small = upper & (fv <= c * eps)
        violations += int((dm[small] > (4.0 / 3.0) * c * eps).sum())
    return {"max_scaled_error": max_scaled, "implication_violations": violations, "pairs": pairs}


def make_field(mode: str, cloud: PointCloud, oracle=None, h: float | None = None, **kw) -> DistanceField:
    if mode == "exact":
        return ExactField(cloud, oracle)
    if mode == "euclidean":
        return EuclideanField(cloud)
    if mode == "sff":
        if h is None:
            raise FieldError("sff field needs a fit radius h")
        return SffField(cloud, h, oracle=oracle, **kw)
    raise FieldError(f"unknown field mode {mode!r}")
