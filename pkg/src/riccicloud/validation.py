"""Small input-validation helpers shared by the estimator facade and the CLI."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils import check_array


def check_points(X) -> np.ndarray:
    """Validate a point cloud: finite 2-d float array with at least one row."""
    return check_array(X, dtype=np.float64, ensure_2d=True, ensure_min_samples=1)


def check_positive(name: str, value) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_dimension(name: str, value) -> int:
    if not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be an integer >= 1, got {value!r}")
    return int(value)
