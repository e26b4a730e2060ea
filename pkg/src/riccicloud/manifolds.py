"""Analytic test manifolds: samplers, geodesics, exp/log, transport, curvature.

Every downstream consistency check is run against these oracles. All operations
are pure; samplers build a fresh seeded generator per call.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Invalid geometric input (off-manifold point, bad dimension, ...)."""


class CutLocusError(GeometryError):
    """Log/transport requested at or beyond the cut locus."""


def _as_point(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise GeometryError(f"expected a point of ambient dimension {d}, got shape {x.shape}")
    return x


def unit_ball_volume(m: int) -> float:
    """Volume of the m-dimensional Euclidean unit ball."""
    return math.pi ** (m / 2.0) / math.gamma(m / 2.0 + 1.0)


@dataclass(frozen=True)
class PointCloud:
    """Finite sample of ambient coordinates, optionally tagged with its oracle."""

    points: np.ndarray
    oracle: object | None = None
    seed: int | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise GeometryError("point cloud must be a nonempty (n, d) array")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    def to_csv(self, path) -> None:
        """Write `x0,...,x{d-1}` rows at full double precision plus a JSON sidecar."""
        path = Path(path)
        d = self.ambient_dim
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{i}" for i in range(d)])
            for row in self.points:
                writer.writerow([f"{v:.17g}" for v in row])
        meta = {"kind": None, "m": None, "d": d, "radius": None, "n": self.n, "seed": self.seed}
        if self.oracle is not None:
            meta.update(
                kind=self.oracle.kind,
                m=self.oracle.intrinsic_dim,
                radius=self.oracle.radius,
            )
        with open(path.with_suffix(path.suffix + ".json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)

    @staticmethod
    def from_csv(path) -> "PointCloud":
        path = Path(path)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader if row]
        pts = np.asarray(rows, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != len(header):
            raise GeometryError("malformed point-cloud CSV")
        oracle = None
        seed = None
        sidecar = path.with_suffix(path.suffix + ".json")
        if sidecar.exists():
            meta = json.loads(sidecar.read_text())
            seed = meta.get("seed")
            if meta.get("kind"):
                oracle = make_oracle(meta["kind"], m=meta.get("m"), radius=meta.get("radius"))
        return PointCloud(pts, oracle=oracle, seed=seed)


class Sphere:
    """Round sphere S^m of radius r embedded in R^{m+1}."""

    kind = "sphere"

    def __init__(self, m: int = 2, radius: float = 1.0):
        if m < 1:
            raise GeometryError("sphere dimension must be >= 1")
        if radius <= 0:
            raise GeometryError("radius must be positive")
        self.intrinsic_dim = int(m)
        self.ambient_dim = int(m) + 1
        self.radius = float(radius)
        self.injectivity_radius = math.pi * self.radius
        self.reach = self.radius
        # surface area of S^m(r): (m+1) v_{m+1} r^m
        self.volume = (m + 1) * unit_ball_volume(m + 1) * self.radius**m

    # -- sampling ---------------------------------------------------------
    def sample_uniform(self, n: int, seed: int) -> PointCloud:
        """n i.i.d. uniform points via normalized Gaussians (sphere picking)."""
        if n < 1:
            raise GeometryError("need n >= 1")
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((n, self.ambient_dim))
        pts = self.radius * z / np.linalg.norm(z, axis=1, keepdims=True)
        return PointCloud(pts, oracle=self, seed=seed)

    # -- distances --------------------------------------------------------
    def geodesic_distance(self, x, y) -> float:
        """r * angle(x, y); chord-based arcsine near 0 keeps full precision
        there (and makes d(x, x) exactly 0), arccos handles far pairs.

        Delegates to the vectorized kernel so scalar and row evaluations agree
        bit-for-bit (libm vs SIMD arcsine can differ in the last ulp).
        """
        x = _as_point(x, self.ambient_dim)
        y = _as_point(y, self.ambient_dim)
        return float(self.pairwise_geodesic(x[None, :], y[None, :])[0, 0])

    def pairwise_geodesic(self, X, Y=None) -> np.ndarray:
        # einsum (not BLAS) keeps results identical across row/scalar shapes
        X = np.asarray(X, dtype=float)
        Y = X if Y is None else np.asarray(Y, dtype=float)
        g = np.clip(np.einsum("id,jd->ij", X, Y) / self.radius**2, -1.0, 1.0)
        out = self.radius * np.arccos(g)
        near = g >= 0.5
        if np.any(near):
            xi, yi = np.nonzero(near)
            diff = X[xi] - Y[yi]
            chord = np.sqrt(np.einsum("kd,kd->k", diff, diff))
            out[near] = 2.0 * self.radius * np.arcsin(
                np.minimum(1.0, chord / (2.0 * self.radius))
            )
        out[out < 1e-14] = 0.0
        return out

    def constraint_residual(self, p) -> float:
        p = _as_point(p, self.ambient_dim)
        return abs(float(np.linalg.norm(p)) - self.radius)

    # -- exp / log / transport --------------------------------------------
    def exp(self, x, v) -> np.ndarray:
        x = _as_point(x, self.ambient_dim)
        v = _as_point(v, self.ambient_dim)
        nv = float(np.linalg.norm(v))
        if nv == 0.0:
            return x.copy()
        t = nv / self.radius
        return math.cos(t) * x + math.sin(t) * (self.radius / nv) * v

    def log(self, x, y) -> np.ndarray:
        x = _as_point(x, self.ambient_dim)
        y = _as_point(y, self.ambient_dim)
        d = self.geodesic_distance(x, y)
        if d >= self.injectivity_radius - 1e-12:
            raise CutLocusError("cut locus: antipodal input to log")
        if d == 0.0:
            return np.zeros_like(x)
        u = y - (float(np.dot(x, y)) / self.radius**2) * x
        return d * u / float(np.linalg.norm(u))

    def parallel_transport(self, x, y, v) -> np.ndarray:
        x = _as_point(x, self.ambient_dim)
        y = _as_point(y, self.ambient_dim)
        v = _as_point(v, self.ambient_dim)
        d = self.geodesic_distance(x, y)
        if d >= self.injectivity_radius - 1e-12:
            raise CutLocusError("cut locus: transport undefined")
        if d == 0.0:
            return v.copy()
        lg = self.log(x, y)
        u = lg / d
        a = float(np.dot(v, u))
        w = v - a * u
        theta = d / self.radius
        u_at_y = math.cos(theta) * u - math.sin(theta) * x / self.radius
        return a * u_at_y + w

    def parallel_map(self, x, y, xt) -> np.ndarray:
        """exp_y(P_xy(log_x(xt))), the Levi-Civita quadrilateral map."""
        return self.exp(y, self.parallel_transport(x, y, self.log(x, xt)))

    # -- curvature ---------------------------------------------------------
    def ricci(self, x, v) -> float:
        # m = 1 has an empty orthonormal complement: intrinsically flat.
        if self.intrinsic_dim == 1:
            return 0.0
        return 1.0 / self.radius**2

    def sectional(self, x, u, v) -> float:
        if self.intrinsic_dim < 2:
            raise GeometryError("sectional curvature needs m >= 2")
        u = _as_point(u, self.ambient_dim)
        v = _as_point(v, self.ambient_dim)
        gram = np.dot(u, u) * np.dot(v, v) - np.dot(u, v) ** 2
        if gram <= 1e-18:
            raise GeometryError("sectional curvature needs linearly independent vectors")
        return 1.0 / self.radius**2

    def second_fundamental_form(self, x, v) -> np.ndarray:
        """Ambient acceleration II(v, v) of the unit-speed geodesic in direction v."""
        x = _as_point(x, self.ambient_dim)
        return -x / self.radius**2

    def tangent_basis(self, x) -> np.ndarray:
        """(m, d) orthonormal basis of T_x, deterministic in x."""
        x = _as_point(x, self.ambient_dim)
        d = self.ambient_dim
        # Gram-Schmidt completion of x-hat, dropping the axis most aligned with x.
        e = np.eye(d)
        k = int(np.argmax(np.abs(x)))
        cols = [x / self.radius]
        for i in range(d):
            if i == k:
                continue
            w = e[i]
            for c in cols:
                w = w - np.dot(w, c) * c
            nw = np.linalg.norm(w)
            if nw > 1e-12:
                cols.append(w / nw)
        return np.asarray(cols[1:])


class Circle(Sphere):
    """Circle of radius r in R^2; sampler draws a uniform angle."""

    kind = "circle"

    def __init__(self, radius: float = 1.0):
        super().__init__(m=1, radius=radius)

    def sample_uniform(self, n: int, seed: int) -> PointCloud:
        if n < 1:
            raise GeometryError("need n >= 1")
        rng = np.random.default_rng(seed)
        theta = rng.uniform(0.0, _TWO_PI, n)
        pts = self.radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return PointCloud(pts, oracle=self, seed=seed)

    def angles(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.arctan2(X[..., 1], X[..., 0])


def _wrap_angle(a):
    """Wrap to [-pi, pi)."""
    return (a + math.pi) % _TWO_PI - math.pi


class CliffordTorus:
    """Flat torus {(cos u, sin u, cos v, sin v)/sqrt(2)} in R^4, metric (du^2+dv^2)/2.

    Extrinsically curved but intrinsically flat, which is exactly the contrast
    the corrected-distance machinery has to respect.
    """

    kind = "clifford_torus"

    def __init__(self):
        self.intrinsic_dim = 2
        self.ambient_dim = 4
        self.radius = 2.0**-0.5
        self.injectivity_radius = math.pi / math.sqrt(2.0)
        self.reach = self.radius
        self.volume = 2.0 * math.pi**2  # (2 pi / sqrt2)^2

    @staticmethod
    def embed(u, v) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        s = 2.0**-0.5
        return np.stack([np.cos(u), np.sin(u), np.cos(v), np.sin(v)], axis=-1) * s

    @staticmethod
    def angles(p) -> tuple[np.ndarray, np.ndarray]:
        p = np.asarray(p, dtype=float)
        return np.arctan2(p[..., 1], p[..., 0]), np.arctan2(p[..., 3], p[..., 2])

    def sample_uniform(self, n: int, seed: int) -> PointCloud:
        if n < 1:
            raise GeometryError("need n >= 1")
        rng = np.random.default_rng(seed)
        u = rng.uniform(0.0, _TWO_PI, n)
        v = rng.uniform(0.0, _TWO_PI, n)
        return PointCloud(self.embed(u, v), oracle=self, seed=seed)

    def geodesic_distance(self, x, y) -> float:
        x = _as_point(x, 4)
        y = _as_point(y, 4)
        return float(self.pairwise_geodesic(x[None, :], y[None, :])[0, 0])

    def pairwise_geodesic(self, X, Y=None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        Y = X if Y is None else np.asarray(Y, dtype=float)
        ux, vx = self.angles(X)
        uy, vy = self.angles(Y)
        du = _wrap_angle(uy[None, :] - ux[:, None])
        dv = _wrap_angle(vy[None, :] - vx[:, None])
        out = np.hypot(du, dv) / math.sqrt(2.0)
        out[out < 1e-14] = 0.0
        return out

    def constraint_residual(self, p) -> float:
        p = _as_point(p, 4)
        s = 2.0**-0.5
        r1 = abs(math.hypot(p[0], p[1]) - s)
        r2 = abs(math.hypot(p[2], p[3]) - s)
        return max(r1, r2)

    def _frame(self, x):
        u, v = self.angles(x)
        e1 = np.array([-math.sin(u), math.cos(u), 0.0, 0.0])
        e2 = np.array([0.0, 0.0, -math.sin(v), math.cos(v)])
        return e1, e2

    def tangent_basis(self, x) -> np.ndarray:
        e1, e2 = self._frame(_as_point(x, 4))
        return np.stack([e1, e2])

    def exp(self, x, v) -> np.ndarray:
        x = _as_point(x, 4)
        v = _as_point(v, 4)
        e1, e2 = self._frame(x)
        a = float(np.dot(v, e1))
        b = float(np.dot(v, e2))
        u0, v0 = self.angles(x)
        s = math.sqrt(2.0)
        return self.embed(u0 + s * a, v0 + s * b)

    def log(self, x, y) -> np.ndarray:
        x = _as_point(x, 4)
        y = _as_point(y, 4)
        ux, vx = self.angles(x)
        uy, vy = self.angles(y)
        du = _wrap_angle(uy - ux)
        dv = _wrap_angle(vy - vx)
        if abs(du) >= math.pi - 1e-12 or abs(dv) >= math.pi - 1e-12:
            raise CutLocusError("cut locus: wrapped angle difference of pi")
        e1, e2 = self._frame(x)
        s = math.sqrt(2.0)
        return (du / s) * e1 + (dv / s) * e2

    def parallel_transport(self, x, y, v) -> np.ndarray:
        x = _as_point(x, 4)
        y = _as_point(y, 4)
        v = _as_point(v, 4)
        if self.geodesic_distance(x, y) >= self.injectivity_radius - 1e-12:
            raise CutLocusError("cut locus: transport undefined")
        e1x, e2x = self._frame(x)
        e1y, e2y = self._frame(y)
        return float(np.dot(v, e1x)) * e1y + float(np.dot(v, e2x)) * e2y

    def parallel_map(self, x, y, xt) -> np.ndarray:
        return self.exp(y, self.parallel_transport(x, y, self.log(x, xt)))

    def ricci(self, x, v) -> float:
        return 0.0

    def sectional(self, x, u, v) -> float:
        u = _as_point(u, 4)
        v = _as_point(v, 4)
        gram = np.dot(u, u) * np.dot(v, v) - np.dot(u, v) ** 2
        if gram <= 1e-18:
            raise GeometryError("sectional curvature needs linearly independent vectors")
        return 0.0

    def second_fundamental_form(self, x, v) -> np.ndarray:
        x = _as_point(x, 4)
        v = _as_point(v, 4)
        e1, e2 = self._frame(x)
        a = float(np.dot(v, e1))
        b = float(np.dot(v, e2))
        u0, v0 = self.angles(x)
        s = 2.0**-0.5
        # gamma(t) = embed(u0 + sqrt2 a t, v0 + sqrt2 b t); second t-derivative at 0.
        return np.array(
            [
                -2.0 * a * a * math.cos(u0),
                -2.0 * a * a * math.sin(u0),
                -2.0 * b * b * math.cos(v0),
                -2.0 * b * b * math.sin(v0),
            ]
        ) * s


def make_oracle(kind: str, m: int | None = None, radius: float | None = None):
    """Factory used by the CLI and CSV metadata round-trips."""
    if kind == "sphere":
        return Sphere(m=2 if m is None else m, radius=1.0 if radius is None else radius)
    if kind == "circle":
        return Circle(radius=1.0 if radius is None else radius)
    if kind == "clifford_torus":
        return CliffordTorus()
    raise GeometryError(f"unknown manifold kind {kind!r}")
