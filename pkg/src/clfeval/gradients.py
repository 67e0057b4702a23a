"""Closed-form partial derivatives of the metrics w.r.t. each matrix cell.

``grad[i, j]`` is the derivative with respect to ``m[i, j]`` (prediction i,
gold j).  Notation inside this module: ``x`` prevalence (column sums), ``y``
bias (row sums), ``c`` correct (diagonal), ``s`` total mass.

A finite-difference counterpart, :func:`numeric_gradient`, is the oracle the
test-suite checks these against.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .exceptions import ClfEvalError, DomainError, UnsupportedMetricError
from .matrix import ConfusionMatrix, as_matrix
from .metrics import GEOMETRIC_EPS, MetricId, MetricKind, metric_value, parse_metric, power_mean

__all__ = ["analytic_gradient", "numeric_gradient", "gradient_supported"]

_ACCURACY_LIKE = {
    MetricKind.ACCURACY,
    MetricKind.MICRO_PRECISION,
    MetricKind.MICRO_RECALL,
    MetricKind.MICRO_F1,
}


def gradient_supported(metric) -> bool:
    metric = parse_metric(metric)
    return not metric.calibrated


def _require(cond, what):
    if not cond:
        raise DomainError(f"gradient undefined on the boundary: {what}")


def _power_mean_slopes(recall, p, mean):
    """dM/dR_k for the power mean M of ``recall``."""
    n = len(recall)
    if p == 1:
        return np.full(n, 1.0 / n)
    if abs(p) < GEOMETRIC_EPS:
        return mean / (n * recall)
    return recall ** (p - 1) * mean ** (1 - p) / n


def _macro_recall_grad(cells, p):
    x = cells.sum(axis=0)
    c = np.diagonal(cells)
    _require(np.all(x > 0), "zero prevalence")
    recall = c / x
    if p < 1:
        _require(np.all(recall > 0), "zero class recall")
    mean = float(power_mean(recall, p))
    slopes = _power_mean_slopes(recall, p, mean)
    # only R_j moves with m[i, j]: dR_j = (delta_ij - R_j) / x_j
    grad = np.tile(-slopes * recall / x, (len(x), 1))
    grad[np.diag_indices_from(grad)] += slopes / x
    return grad, mean


def analytic_gradient(metric: MetricId | str, m) -> np.ndarray:
    """Matrix of partial derivatives of ``metric`` at ``m``.

    Raises :class:`UnsupportedMetricError` for calibrated variants and
    :class:`DomainError` when a denominator vanishes at ``m``.
    """
    metric = parse_metric(metric)
    if metric.calibrated:
        raise UnsupportedMetricError(f"no analytic gradient for {metric.name}")
    m = as_matrix(m).to_float()
    cells = m.cells
    n = m.n
    x = cells.sum(axis=0)
    y = cells.sum(axis=1)
    c = np.diagonal(cells).copy()
    s = float(cells.sum())
    _require(s > 0, "zero mass")
    eye = np.eye(n)
    kind = metric.kind

    if kind in _ACCURACY_LIKE:
        acc = c.sum() / s
        return (eye - acc) / s

    if kind is MetricKind.MACRO_RECALL:
        grad, _ = _macro_recall_grad(cells, metric.mean_exponent)
        return grad

    if kind is MetricKind.BOOKMAKER_WIN:
        grad, mean = _macro_recall_grad(cells, 1.0)
        return (n * mean - 1) + s * n * grad

    if kind is MetricKind.CLASS_RECALL:
        k = m.labels.index(metric.label)
        _require(x[k] > 0, "zero prevalence")
        grad = np.zeros((n, n))
        grad[:, k] = -c[k] / x[k] ** 2
        grad[k, k] += 1 / x[k]
        return grad

    if kind is MetricKind.MACRO_PRECISION:
        _require(np.all(y > 0), "zero bias")
        precision = c / y
        # P_i moves with every cell of row i
        return (eye - precision[:, None]) / (n * y[:, None])

    if kind is MetricKind.MACRO_F1:
        z = x + y
        _require(np.all(z > 0), "class without any mass")
        f1 = 2 * c / z
        return (2 * eye / z[:, None] - (f1 / z)[:, None] - (f1 / z)[None, :]) / n

    if kind is MetricKind.MACRO_F1_PRIME:
        _require(np.all(x > 0) and np.all(y > 0), "zero bias or prevalence")
        r = (c / x).mean()
        p = (c / y).mean()
        grad_r = (eye - (c / x)[None, :]) / (n * x[None, :])
        grad_p = (eye - (c / y)[:, None]) / (n * y[:, None])
        denom = (r + p) ** 2
        return 2 * p**2 / denom * grad_r + 2 * r**2 / denom * grad_p

    if kind is MetricKind.WEIGHTED_F1:
        z = x + y
        _require(np.all(z > 0), "class without any mass")
        f1 = 2 * c / z
        weighted = (x * f1).sum() / s
        col_term = f1 - x * f1 / z  # from x_j growing
        row_term = x * f1 / z  # from y_i growing
        grad = col_term[None, :] - row_term[:, None] + 2 * eye * (x / z)[:, None]
        return (grad - weighted) / s

    if kind in (MetricKind.KAPPA, MetricKind.MCC):
        r = c.sum()
        chance = (x * y).sum()
        num = r * s - chance
        z = x[:, None] + y[None, :]  # d chance / d m[i, j]
        d_num = eye * s + r - z
        if kind is MetricKind.KAPPA:
            den = s * s - chance
            _require(den > 0, "chance agreement is 1")
            d_den = 2 * s - z
            return (d_num * den - num * d_den) / den**2
        a = s * s - (x * x).sum()
        b = s * s - (y * y).sum()
        _require(a > 0 and b > 0, "single gold or predicted class")
        den = np.sqrt(a * b)
        d_a = 2 * s - 2 * x[None, :]
        d_b = 2 * s - 2 * y[:, None]
        return d_num / den - num * (d_a / a + d_b / b) / (2 * den)

    raise UnsupportedMetricError(f"no analytic gradient for {metric.name}")  # pragma: no cover


def numeric_gradient(metric: MetricId | str | Callable, m, step: float | None = None) -> np.ndarray:
    """Finite-difference gradient.

    Central differences ``(f(m + h e_ij) - f(m - h e_ij)) / 2h``; cells with
    less mass than ``h`` fall back to a forward difference so the perturbed
    matrix stays non-negative.  ``step`` defaults to ``1e-5`` times the mean
    cell mass.
    """
    m = as_matrix(m).to_float()
    if callable(metric) and not isinstance(metric, (str, MetricId)):
        fn = metric
    else:
        metric = parse_metric(metric)

        def fn(mat):
            return float(metric_value(metric, mat))

    cells = m.cells
    if step is None:
        step = 1e-5 * max(float(cells.mean()), 1e-12)
    if not step > 0:
        raise ClfEvalError("step must be positive")

    def at(arr):
        try:
            value = float(fn(ConfusionMatrix(m.labels, arr)))
        except ClfEvalError as exc:
            raise DomainError(f"metric undefined during perturbation: {exc}") from None
        if not np.isfinite(value):
            raise DomainError("metric undefined during perturbation")
        return value

    grad = np.empty(cells.shape)
    base = None
    work = cells.copy()
    for i in range(m.n):
        for j in range(m.n):
            orig = cells[i, j]
            work[i, j] = orig + step
            up = at(work)
            if orig >= step:
                work[i, j] = orig - step
                grad[i, j] = (up - at(work)) / (2 * step)
            else:
                if base is None:
                    base = at(cells)
                grad[i, j] = (up - base) / step
            work[i, j] = orig
    return grad
