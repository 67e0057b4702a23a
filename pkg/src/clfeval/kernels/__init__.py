"""Batch metric kernels over stacks of matrices.

The numba implementation is used when numba imports and the environment
variable ``CLFEVAL_DISABLE_NUMBA`` is unset or ``0``; otherwise the pure
numpy implementation is selected.  Both share one contract and are compared
in ``benchmarks/bench_kernels.py``.
"""
import os

import numpy as np

from . import _codes as codes
from . import _numpy

__all__ = ["BACKEND", "available_backends", "batch_metric", "batch_increments", "metric_code", "codes"]


def _numba_wanted() -> bool:
    return os.environ.get("CLFEVAL_DISABLE_NUMBA", "0").strip().lower() in ("", "0", "false", "no")


BACKEND = "numpy"
if _numba_wanted():
    try:
        from . import _numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _numba = None
    else:
        BACKEND = "numba"

_CODE_BY_KIND = {
    "accuracy": codes.ACCURACY,
    "micro_precision": codes.ACCURACY,
    "micro_recall": codes.ACCURACY,
    "micro_f1": codes.ACCURACY,
    "macro_recall": codes.MACRO_RECALL,
    "macro_precision": codes.MACRO_PRECISION,
    "macro_f1": codes.MACRO_F1,
    "macro_f1_prime": codes.MACRO_F1_PRIME,
    "weighted_f1": codes.WEIGHTED_F1,
    "kappa": codes.KAPPA,
    "mcc": codes.MCC,
    "bookmaker_win": codes.BOOKMAKER_WIN,
    "class_recall": codes.CLASS_RECALL,
}


def metric_code(metric, labels=None) -> tuple[int, float, bool]:
    """Translate a :class:`~clfeval.metrics.MetricId` into ``(code, param, calibrated)``."""
    kind = metric.kind.value
    code = _CODE_BY_KIND[kind]
    if kind == "macro_recall":
        param = float(metric.mean_exponent)
    elif kind == "class_recall":
        if labels is None:
            raise ValueError("class_recall kernels need the label space")
        param = float(labels.index(metric.label))
    else:
        param = 1.0
    return code, param, bool(metric.calibrated)


def available_backends() -> tuple[str, ...]:
    """Backends importable in this process (independent of the env flag)."""
    try:
        from . import _numba  # noqa: F401
    except ImportError:  # pragma: no cover
        return ("numpy",)
    return ("numpy", "numba")


def _backend(name):
    if name is None:
        name = BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba":
        if BACKEND != "numba":
            from . import _numba as mod

            return mod
        return _numba
    return _numpy


def batch_metric(cells, metric, labels=None, backend=None) -> np.ndarray:
    """Metric value for every matrix in ``cells`` (shape ``(B, n, n)``); NaN if undefined."""
    code, param, calibrated = metric_code(metric, labels)
    cells = np.ascontiguousarray(cells, dtype=np.float64)
    return _backend(backend).batch_metric(cells, code, param, calibrated)


def batch_increments(cells, metric, labels=None, delta=1.0, backend=None) -> np.ndarray:
    """``out[b, i, j]`` = metric of ``cells[b]`` with ``delta`` added at ``(i, j)``."""
    code, param, calibrated = metric_code(metric, labels)
    cells = np.ascontiguousarray(cells, dtype=np.float64)
    return _backend(backend).batch_increments(cells, code, param, calibrated, float(delta))
