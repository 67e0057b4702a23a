"""Vectorised numpy kernels over stacks of confusion matrices ``(B, n, n)``.

Undefined values are NaN.  Semantics follow :mod:`clfeval.metrics`.
"""
import numpy as np

from ._codes import (
    ACCURACY,
    BOOKMAKER_WIN,
    CLASS_RECALL,
    GEOMETRIC_EPS,
    KAPPA,
    MACRO_F1,
    MACRO_F1_PRIME,
    MACRO_PRECISION,
    MACRO_RECALL,
    MCC,
    WEIGHTED_F1,
)


def _ratio(num, den):
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den != 0)
    return out


def _power_mean(values, p):
    n = values.shape[1]
    has_zero = np.any(values == 0, axis=1)
    if p == 1.0:
        return values.sum(axis=1) / n
    if abs(p) < GEOMETRIC_EPS:
        safe = np.where(values > 0, values, 1.0)
        out = np.exp(np.log(safe).mean(axis=1))
        return np.where(has_zero, 0.0, out)
    if p < 0:
        safe = np.where(values > 0, values, 1.0)
        out = ((safe**p).mean(axis=1)) ** (1.0 / p)
        return np.where(has_zero, 0.0, out)
    return ((values**p).mean(axis=1)) ** (1.0 / p)


def calibrate_batch(cells):
    """Scale columns to equal prevalence; rows with a zero prevalence become NaN."""
    n = cells.shape[1]
    prevalence = cells.sum(axis=1)
    total = cells.sum(axis=(1, 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = total[:, None] / (n * prevalence)
    lam[~np.isfinite(lam)] = np.nan
    return cells * lam[:, None, :]


def batch_metric(cells, code, param=1.0, calibrated=False):
    cells = np.asarray(cells, dtype=np.float64)
    if calibrated:
        cells = calibrate_batch(cells)
    n = cells.shape[1]
    bias = cells.sum(axis=2)
    prevalence = cells.sum(axis=1)
    correct = np.diagonal(cells, axis1=1, axis2=2)
    total = cells.sum(axis=(1, 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        if code == ACCURACY:
            out = correct.sum(axis=1) / total
        elif code in (MACRO_RECALL, BOOKMAKER_WIN):
            recall = _ratio(correct, prevalence)
            out = _power_mean(recall, param if code == MACRO_RECALL else 1.0)
            out = np.where(np.any(prevalence == 0, axis=1), np.nan, out)
            if code == BOOKMAKER_WIN:
                out = total * (n * out - 1.0)
        elif code == MACRO_PRECISION:
            out = _ratio(correct, bias).sum(axis=1) / n
        elif code == MACRO_F1:
            out = _ratio(2.0 * correct, bias + prevalence).sum(axis=1) / n
        elif code == MACRO_F1_PRIME:
            r = _ratio(correct, prevalence).sum(axis=1) / n
            p = _ratio(correct, bias).sum(axis=1) / n
            out = _ratio(2.0 * r * p, r + p)
        elif code == WEIGHTED_F1:
            f1 = _ratio(2.0 * correct, bias + prevalence)
            out = (prevalence * f1).sum(axis=1) / total
        elif code in (KAPPA, MCC):
            observed = correct.sum(axis=1) * total
            chance = (prevalence * bias).sum(axis=1)
            s2 = total * total
            if code == KAPPA:
                out = np.where(chance < s2, (observed - chance) / (s2 - chance), np.nan)
            else:
                sb = s2 - (bias * bias).sum(axis=1)
                sp = s2 - (prevalence * prevalence).sum(axis=1)
                ok = (sb > 0) & (sp > 0)
                root = np.sqrt(np.where(ok, sb * sp, 1.0))
                out = np.where(ok, (observed - chance) / root, np.nan)
        elif code == CLASS_RECALL:
            k = int(param)
            out = _ratio(correct[:, k], prevalence[:, k])
        else:
            raise ValueError(f"unknown metric code {code}")
    out = np.where(total > 0, out, np.nan)
    return np.asarray(out, dtype=np.float64)


def batch_increments(cells, code, param=1.0, calibrated=False, delta=1.0):
    """Metric value after adding ``delta`` to each cell in turn; shape ``(B, n, n)``."""
    cells = np.asarray(cells, dtype=np.float64)
    n = cells.shape[1]
    out = np.empty(cells.shape, dtype=np.float64)
    work = cells.copy()
    for i in range(n):
        for j in range(n):
            work[:, i, j] = cells[:, i, j] + delta
            out[:, i, j] = batch_metric(work, code, param, calibrated)
            work[:, i, j] = cells[:, i, j]
    return out
