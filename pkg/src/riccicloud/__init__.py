"""Ollivier-Ricci curvature of manifolds estimated from point clouds.

Pipeline: sample (or load) a point cloud, pick a pairwise distance field
(exact geodesic, Euclidean, or curvature-corrected), build the epsilon-graph
with its profile-bent shortest-path metric, and solve exact optimal transport
between Ollivier balls to get per-pair curvatures, global lower bounds, and
heat-flow contraction diagnostics.
"""

from .manifolds import (
    Circle,
    CliffordTorus,
    CutLocusError,
    GeometryError,
    PointCloud,
    Sphere,
    make_oracle,
    unit_ball_volume,
)
from .fields import (
    DistanceField,
    EuclideanField,
    ExactField,
    FieldError,
    SffEstimate,
    SffField,
    chord_expansion_check,
    corrected_distance,
    estimate_tangent_basis,
    fit_sff,
    make_field,
    validate_assumption_31,
)
from .transport import (
    DiscreteMeasure,
    TransportError,
    TransportPlan,
    bottleneck_matching,
    bottleneck_matching_points,
    estimate_w_infty_empirical,
    splitting_check,
    w1_exact,
    w1_brute,
    w_infty_rate,
)
from .rgg import BallMeasure, Rgg, RggError, build_rgg, degree_density, estimate_ball_difference_constant
from .graph_metric import (
    GraphMetric,
    MetricError,
    ProfileFn,
    adjacent_pair_set,
    compare_metrics,
    default_profile,
)
from .curvature import (
    CurvatureRecord,
    GlobalBoundReport,
    consistency_report,
    continuum_kappa_mc,
    error_scale,
    global_lower_bound,
    kappa_pair,
    pair_workload,
)
from .heat import HeatSystem, averaging_contraction_check, contraction_experiment, heat_flow
from .estimator import RicciCurvatureEstimator

__version__ = "0.1.0"

__all__ = [
    "Circle",
    "CliffordTorus",
    "CutLocusError",
    "GeometryError",
    "PointCloud",
    "Sphere",
    "make_oracle",
    "unit_ball_volume",
    "DistanceField",
    "EuclideanField",
    "ExactField",
    "FieldError",
    "SffEstimate",
    "SffField",
    "chord_expansion_check",
    "corrected_distance",
    "estimate_tangent_basis",
    "fit_sff",
    "make_field",
    "validate_assumption_31",
    "DiscreteMeasure",
    "TransportError",
    "TransportPlan",
    "bottleneck_matching",
    "bottleneck_matching_points",
    "estimate_w_infty_empirical",
    "splitting_check",
    "w1_exact",
    "w1_brute",
    "w_infty_rate",
    "BallMeasure",
    "Rgg",
    "RggError",
    "build_rgg",
    "degree_density",
    "estimate_ball_difference_constant",
    "GraphMetric",
    "MetricError",
    "ProfileFn",
    "adjacent_pair_set",
    "compare_metrics",
    "default_profile",
    "CurvatureRecord",
    "GlobalBoundReport",
    "consistency_report",
    "continuum_kappa_mc",
    "error_scale",
    "global_lower_bound",
    "kappa_pair",
    "pair_workload",
    "HeatSystem",
    "averaging_contraction_check",
    "contraction_experiment",
    "heat_flow",
    "RicciCurvatureEstimator",
]
