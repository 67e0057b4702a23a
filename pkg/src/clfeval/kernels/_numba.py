"""Numba versions of the batch kernels; same contract as ``_numpy``."""
import math

import numpy as np
from numba import njit

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


@njit(cache=True, nogil=True, inline="always")
def _power_mean(values, p):
    n = values.shape[0]
    has_zero = False
    for k in range(n):
        if values[k] == 0.0:
            has_zero = True
    if p == 1.0:
        s = 0.0
        for k in range(n):
            s += values[k]
        return s / n
    if abs(p) < GEOMETRIC_EPS:
        if has_zero:
            return 0.0
        s = 0.0
        for k in range(n):
            s += math.log(values[k])
        return math.exp(s / n)
    if p < 0 and has_zero:
        return 0.0
    s = 0.0
    for k in range(n):
        s += values[k] ** p
    return (s / n) ** (1.0 / p)


@njit(cache=True, nogil=True, inline="always")
def _calibrate_into(c, b, out):
    n = c.shape[1]
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += c[b, i, j]
    for j in range(n):
        prev = 0.0
        for i in range(n):
            prev += c[b, i, j]
        if prev == 0.0:
            return False
        lam = total / (n * prev)
        for i in range(n):
            out[0, i, j] = c[b, i, j] * lam
    return True


@njit(cache=True, nogil=True, inline="always")
def _value(c, b, code, param, bias, prev, recall):
    """Metric of matrix ``c[b]``; ``bias``, ``prev``, ``recall`` are scratch."""
    n = c.shape[1]
    for i in range(n):
        bias[i] = 0.0
        prev[i] = 0.0
    total = 0.0
    hits = 0.0
    for i in range(n):
        hits += c[b, i, i]
        for j in range(n):
            v = c[b, i, j]
            bias[i] += v
            prev[j] += v
            total += v
    if total == 0.0:
        return np.nan

    if code == ACCURACY:
        return hits / total
    if code == MACRO_RECALL or code == BOOKMAKER_WIN:
        for i in range(n):
            if prev[i] == 0.0:
                return np.nan
            recall[i] = c[b, i, i] / prev[i]
        if code == MACRO_RECALL:
            return _power_mean(recall, param)
        return total * (n * _power_mean(recall, 1.0) - 1.0)
    if code == MACRO_PRECISION:
        s = 0.0
        for i in range(n):
            if bias[i] != 0.0:
                s += c[b, i, i] / bias[i]
        return s / n
    if code == MACRO_F1:
        s = 0.0
        for i in range(n):
            z = bias[i] + prev[i]
            if z != 0.0:
                s += 2.0 * c[b, i, i] / z
        return s / n
    if code == MACRO_F1_PRIME:
        r = 0.0
        p = 0.0
        for i in range(n):
            if prev[i] != 0.0:
                r += c[b, i, i] / prev[i]
            if bias[i] != 0.0:
                p += c[b, i, i] / bias[i]
        r /= n
        p /= n
        if r + p == 0.0:
            return 0.0
        return 2.0 * r * p / (r + p)
    if code == WEIGHTED_F1:
        s = 0.0
        for i in range(n):
            z = bias[i] + prev[i]
            if z != 0.0:
                s += prev[i] * (2.0 * c[b, i, i] / z)
        return s / total
    if code == KAPPA or code == MCC:
        observed = hits * total
        s2 = total * total
        chance = 0.0
        bb = 0.0
        pp = 0.0
        for i in range(n):
            chance += prev[i] * bias[i]
            bb += bias[i] * bias[i]
            pp += prev[i] * prev[i]
        if code == KAPPA:
            if chance >= s2:
                return np.nan
            return (observed - chance) / (s2 - chance)
        sb = s2 - bb
        sp = s2 - pp
        if sb <= 0.0 or sp <= 0.0:
            return np.nan
        return (observed - chance) / math.sqrt(sb * sp)
    if code == CLASS_RECALL:
        k = int(param)
        if prev[k] == 0.0:
            return 0.0
        return c[b, k, k] / prev[k]
    return np.nan


@njit(cache=True, nogil=True, inline="always")
def _eval(c, b, work, bias, prev, recall, code, param, calibrated):
    if calibrated:
        if not _calibrate_into(c, b, work):
            return np.nan
        return _value(work, 0, code, param, bias, prev, recall)
    return _value(c, b, code, param, bias, prev, recall)


@njit(cache=True, nogil=True)
def batch_metric(cells, code, param=1.0, calibrated=False):
    size = cells.shape[0]
    n = cells.shape[1]
    out = np.empty(size)
    work = np.empty((1, n, n))
    bias = np.empty(n)
    prev = np.empty(n)
    recall = np.empty(n)
    for b in range(size):
        out[b] = _eval(cells, b, work, bias, prev, recall, code, param, calibrated)
    return out


@njit(cache=True, nogil=True)
def batch_increments(cells, code, param=1.0, calibrated=False, delta=1.0):
    size = cells.shape[0]
    n = cells.shape[1]
    out = np.empty(cells.shape)
    m = np.empty((1, n, n))
    work = np.empty((1, n, n))
    bias = np.empty(n)
    prev = np.empty(n)
    recall = np.empty(n)
    for b in range(size):
        for i in range(n):
            for j in range(n):
                m[0, i, j] = cells[b, i, j]
        for i in range(n):
            for j in range(n):
                m[0, i, j] = cells[b, i, j] + delta
                out[b, i, j] = _eval(m, 0, work, bias, prev, recall, code, param, calibrated)
                m[0, i, j] = cells[b, i, j]
    return out
