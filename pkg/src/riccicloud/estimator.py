"""scikit-learn style front end for the curvature pipeline.

`RicciCurvatureEstimator.fit(X)` runs point cloud -> distance field -> RGG ->
graph metric -> per-pair Ollivier curvatures, and exposes the rescaled
curvature estimates plus the empirical global lower bound as attributes. It
plays by the BaseEstimator rules (get_params/set_params/clone) so it composes
with sklearn tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .curvature import CurvatureError, global_lower_bound, kappa_pair, pair_workload
from .fields import make_field
from .graph_metric import GraphMetric, MetricError
from .manifolds import PointCloud
from .rgg import build_rgg
from .validation import check_dimension, check_points, check_positive


class RicciCurvatureEstimator(BaseEstimator):
    """Estimate intrinsic Ricci curvature of the manifold underlying a cloud.

    Parameters
    ----------
    eps : Ollivier ball radius (the RGG connectivity scale).
    intrinsic_dim : manifold dimension m used for the kappa_hat rescaling.
    field : "sff" (data-driven corrected distances), "euclidean", or "exact"
        (needs `oracle`).
    fit_radius : neighborhood radius for the curvature fits; defaults to 4*eps.
    c0, c1 : graph-metric scale factors (delta0 = c0 eps, delta1 = c1 eps).
    workload : "theorem_window", "all_edges", or "sample".
    max_pairs : cap on evaluated pairs (seeded subsample).
    compute_global_bound : also run the adjacent-pair global lower bound
        (all-pairs shortest paths; keep n moderate).
    oracle : analytic manifold, optional; enables exact fields and reference
        Ricci values on the records.
    random_state : seed for the pair subsample.

    Attributes (after fit)
    ----------------------
    records_ : list of per-pair curvature records.
    kappa_hat_ : array of rescaled curvature estimates 2(m+2) kappa / eps^2.
    kappa_hat_mean_ : their mean (the headline intrinsic-curvature estimate).
    global_bound_ : GlobalBoundReport or None.
    """

    def __init__(
        self,
        eps: float = 0.3,
        intrinsic_dim: int = 2,
        field: str = "sff",
        fit_radius: float | None = None,
        c0: float = 0.05,
        c1: float = 2.2,
        workload: str = "theorem_window",
        max_pairs: int | None = 50,
        compute_global_bound: bool = False,
        oracle=None,
        random_state: int = 0,
    ):
        self.eps = eps
        self.intrinsic_dim = intrinsic_dim
        self.field = field
        self.fit_radius = fit_radius
        self.c0 = c0
        self.c1 = c1
        self.workload = workload
        self.max_pairs = max_pairs
        self.compute_global_bound = compute_global_bound
        self.oracle = oracle
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_points(X)
        eps = check_positive("eps", self.eps)
        m = check_dimension("intrinsic_dim", self.intrinsic_dim)
        cloud = PointCloud(X, oracle=self.oracle)
        h = 4.0 * eps if self.fit_radius is None else check_positive("fit_radius", self.fit_radius)
        kw = {"h": h, "intrinsic_dim": m} if self.field == "sff" else {}
        field = make_field(self.field, cloud, oracle=self.oracle, **kw)
        rgg = build_rgg(cloud, eps, field)
        metric = GraphMetric(rgg, c0=self.c0, c1=self.c1)
        pairs = pair_workload(rgg, metric, policy=self.workload, k=self.max_pairs,
                              seed=self.random_state)
        records = []
        for i, j in pairs:
            try:
                records.append(kappa_pair(rgg, metric, i, j, oracle=self.oracle, m=m))
            except (MetricError, CurvatureError):
                continue
        self.n_features_in_ = X.shape[1]
        self.cloud_ = cloud
        self.rgg_ = rgg
        self.metric_ = metric
        self.records_ = records
        self.kappa_ = np.array([r.kappa for r in records])
        self.kappa_hat_ = np.array([r.kappa_hat for r in records])
        self.kappa_hat_mean_ = float(self.kappa_hat_.mean()) if records else float("nan")
        self.regime_ok_ = metric.regime_ok
        if self.compute_global_bound:
            self.global_bound_ = global_lower_bound(rgg, metric, oracle=self.oracle)
        else:
            self.global_bound_ = None
        return self

    def fit_predict(self, X, y=None) -> np.ndarray:
        """Fit and return the per-pair rescaled curvature estimates."""
        return self.fit(X).kappa_hat_
