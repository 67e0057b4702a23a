"""Confusion-matrix metrics, executable metric properties and ranking analysis."""
from .exceptions import ClfEvalError
from .matrix import (
    ChanceModel,
    ConfusionMatrix,
    LabelSpace,
    ScalingVector,
    build_matrix,
    calibrate,
    calibration_scaling,
    chance_matrix,
    class_masses,
    normalize,
    scale,
)
from .metrics import (
    DEFAULT_ROSTER,
    TABLE_METRICS,
    MetricId,
    MetricKind,
    MetricScore,
    compute,
    evaluate_all,
    metric_value,
    parse_metric,
)

__version__ = "0.1.0"

__all__ = [
    "ClfEvalError",
    "ChanceModel",
    "ConfusionMatrix",
    "LabelSpace",
    "ScalingVector",
    "build_matrix",
    "calibrate",
    "calibration_scaling",
    "chance_matrix",
    "class_masses",
    "normalize",
    "scale",
    "DEFAULT_ROSTER",
    "TABLE_METRICS",
    "MetricId",
    "MetricKind",
    "MetricScore",
    "compute",
    "evaluate_all",
    "metric_value",
    "parse_metric",
]
