"""Ranking systems under several metrics and comparing the rankings.

Ranks are fractional: tied scores share the average of the positions they
occupy, rank 1 is the best score, and undefined (NaN) scores rank last.
Spearman's rho is the Pearson correlation of two such rank vectors.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import numpy as np

from .exceptions import ClfEvalError, LabelSpaceMismatchError, UnknownMetricError
from .matrix import ConfusionMatrix, as_matrix
from .metrics import MetricId, evaluate_all, parse_metric, power_mean

__all__ = [
    "TIE_TOL",
    "SystemRun",
    "RankingTable",
    "CorrelationMatrix",
    "EnsembleEntry",
    "Projection",
    "ConsistencyCheck",
    "fractional_ranks",
    "spearman",
    "score_systems",
    "correlation_matrix",
    "ensemble_rank",
    "ensemble_winners",
    "project_precision",
    "load_published_ranking",
    "published_consistency",
]

TIE_TOL = 1e-12


@dataclass(frozen=True)
class SystemRun:
    system_id: str
    matrix: ConfusionMatrix

    def __post_init__(self):
        object.__setattr__(self, "system_id", str(self.system_id))
        object.__setattr__(self, "matrix", as_matrix(self.matrix))


def fractional_ranks(values: Sequence[float], *, higher_is_better: bool = True, tie_tol: float = TIE_TOL) -> np.ndarray:
    """Average ranks, 1 = best.

    Scores within ``tie_tol`` of their sorted neighbour form one tie group
    (so float noise from equivalent formulas does not split ties).  NaN
    values are tied among themselves behind every defined score.
    """
    values = np.asarray(values, dtype=np.float64)
    ranks = np.empty(len(values))
    defined = np.flatnonzero(~np.isnan(values))
    key = -values[defined] if higher_is_better else values[defined]
    order = defined[np.argsort(key, kind="stable")]
    pos = 0
    while pos < len(order):
        end = pos + 1
        while end < len(order) and abs(values[order[end]] - values[order[end - 1]]) <= tie_tol:
            end += 1
        ranks[order[pos:end]] = (pos + 1 + end) / 2.0
        pos = end
    undefined = np.flatnonzero(np.isnan(values))
    if undefined.size:
        ranks[undefined] = (len(defined) + 1 + len(values)) / 2.0
    return ranks


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    den = math.sqrt(float(da @ da) * float(db @ db))
    if den == 0:
        raise ClfEvalError("rank correlation undefined for a constant vector")
    return float(da @ db) / den


def _rank_correlation(ra: np.ndarray, rb: np.ndarray) -> float:
    if np.ptp(ra) == 0 or np.ptp(rb) == 0:
        raise ClfEvalError("rank correlation undefined for a constant vector")
    if np.array_equal(ra, rb):
        return 1.0
    if np.array_equal(ra, len(ra) + 1 - rb):
        return -1.0
    return max(-1.0, min(1.0, _pearson(ra, rb)))


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman's rho with average ranks for ties."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ClfEvalError("spearman needs two vectors of equal length")
    if len(x) < 2:
        raise ClfEvalError("spearman needs at least two observations")
    if np.isnan(x).any() or np.isnan(y).any():
        raise ClfEvalError("spearman input contains undefined values")
    return _rank_correlation(fractional_ranks(x), fractional_ranks(y))


def _fmt(v: float) -> str:
    return "" if np.isnan(v) else repr(float(v))


@dataclass(frozen=True)
class RankingTable:
    """Scores and fractional ranks, systems as rows and metrics as columns."""

    systems: tuple[str, ...]
    metrics: tuple[MetricId, ...]
    scores: np.ndarray
    ranks: np.ndarray
    flags: tuple[tuple[frozenset, ...], ...] = ()

    @classmethod
    def from_scores(cls, systems: Sequence[str], metrics: Sequence, scores) -> "RankingTable":
        """Build a table from precomputed scores (e.g. published numbers)."""
        metrics = tuple(parse_metric(m) for m in metrics)
        scores = np.array(scores, dtype=np.float64).reshape(len(systems), len(metrics))
        ranks = np.column_stack([fractional_ranks(scores[:, k]) for k in range(len(metrics))]) if metrics else scores.copy()
        flags = tuple(tuple(frozenset() for _ in metrics) for _ in systems)
        return cls(tuple(str(s) for s in systems), metrics, scores, ranks.reshape(scores.shape), flags)

    def column(self, metric) -> int:
        metric = parse_metric(metric)
        try:
            return self.metrics.index(metric)
        except ValueError:
            raise UnknownMetricError(f"metric {metric.name} not in table") from None

    def scores_of(self, metric) -> np.ndarray:
        return self.scores[:, self.column(metric)]

    def ranks_of(self, metric) -> np.ndarray:
        return self.ranks[:, self.column(metric)]

    def to_csv(self) -> str:
        """Scores followed by ranks; undefined scores are empty cells."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        names = [m.name for m in self.metrics]
        writer.writerow(["system"] + names + [f"rank({n})" for n in names])
        for s, system in enumerate(self.systems):
            writer.writerow([system] + [_fmt(v) for v in self.scores[s]] + [repr(float(r)) for r in self.ranks[s]])
        return buf.getvalue()

    def to_dict(self) -> dict:
        rows = []
        for s, system in enumerate(self.systems):
            entry = {"system": system, "scores": {}, "ranks": {}, "flags": {}}
            for k, m in enumerate(self.metrics):
                v = self.scores[s, k]
                entry["scores"][m.name] = None if np.isnan(v) else float(v)
                entry["ranks"][m.name] = float(self.ranks[s, k])
                if self.flags:
                    entry["flags"][m.name] = sorted(self.flags[s][k])
            rows.append(entry)
        return {"metrics": [m.name for m in self.metrics], "rows": rows}


def score_systems(runs: Sequence[SystemRun], metrics: Sequence) -> RankingTable:
    """Evaluate every run under every metric and rank each metric column."""
    runs = list(runs)
    if not runs:
        raise ClfEvalError("at least one system run is required")
    labels = runs[0].matrix.labels
    for run in runs[1:]:
        if run.matrix.labels != labels:
            raise LabelSpaceMismatchError(
                f"system {run.system_id!r} uses labels {list(run.matrix.labels.labels)}, expected {list(labels.labels)}"
            )
    metrics = tuple(parse_metric(m) for m in metrics)
    results = [evaluate_all(run.matrix, metrics) for run in runs]
    scores = np.array([[float(r.value) for r in row] for row in results], dtype=np.float64).reshape(len(runs), len(metrics))
    flags = tuple(tuple(r.flags for r in row) for row in results)
    ranks = np.column_stack([fractional_ranks(scores[:, k]) for k in range(len(metrics))]) if metrics else scores.copy()
    return RankingTable(tuple(r.system_id for r in runs), metrics, scores, ranks.reshape(scores.shape), flags)


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pairwise Spearman rho between metric columns; NaN marks an undefined pair."""

    metrics: tuple[MetricId, ...]
    rho: np.ndarray
    undefined: tuple[tuple[str, str], ...] = ()

    def get(self, a, b) -> float:
        i = self.metrics.index(parse_metric(a))
        j = self.metrics.index(parse_metric(b))
        return float(self.rho[i, j])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        names = [m.name for m in self.metrics]
        writer.writerow([""] + names)
        for name, row in zip(names, self.rho):
            writer.writerow([name] + [_fmt(v) for v in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "metrics": [m.name for m in self.metrics],
            "rho": [[None if np.isnan(v) else float(v) for v in row] for row in self.rho],
            "undefined": [list(p) for p in self.undefined],
        }


def correlation_matrix(table: RankingTable) -> CorrelationMatrix:
    """Spearman rho for every pair of metric columns.

    Systems with an undefined score in either column are left out of that
    pair; a pair with fewer than two systems left, or a constant column, is
    undefined (NaN).  The diagonal is 1 by definition.
    """
    if len(table.systems) < 2:
        raise ClfEvalError("correlation needs at least two systems")
    k = len(table.metrics)
    rho = np.eye(k)
    undefined = []
    for a in range(k):
        for b in range(a + 1, k):
            xa, xb = table.scores[:, a], table.scores[:, b]
            keep = ~np.isnan(xa) & ~np.isnan(xb)
            try:
                if keep.sum() < 2:
                    raise ClfEvalError("fewer than two defined systems")
                value = spearman(xa[keep], xb[keep])
            except ClfEvalError:
                value = math.nan
                undefined.append((table.metrics[a].name, table.metrics[b].name))
            rho[a, b] = rho[b, a] = value
    return CorrelationMatrix(table.metrics, rho, tuple(undefined))


@dataclass(frozen=True)
class EnsembleEntry:
    system: str
    mean_rank: float
    position: float
    tied: bool


def ensemble_rank(table: RankingTable, metric_subset: Sequence) -> list[EnsembleEntry]:
    """Mean fractional rank over a metric subset, best first.

    ``position`` is the fractional rank of the mean rank itself, so systems
    that tie keep the same position and are flagged ``tied``; ties are never
    broken.
    """
    subset = [parse_metric(m) for m in metric_subset]
    if not subset:
        raise ClfEvalError("metric subset is empty")
    cols = [table.column(m) for m in subset]
    means = table.ranks[:, cols].mean(axis=1)
    position = fractional_ranks(means, higher_is_better=False)
    counts = {p: int(np.sum(position == p)) for p in position}
    order = np.argsort(position, kind="stable")
    return [
        EnsembleEntry(table.systems[s], float(means[s]), float(position[s]), counts[position[s]] > 1) for s in order
    ]


def ensemble_winners(entries: Sequence[EnsembleEntry]) -> list[str]:
    """Every system sharing the best ensemble position."""
    if not entries:
        return []
    best = min(e.position for e in entries)
    return [e.system for e in entries if e.position == best]


@dataclass(frozen=True)
class Projection:
    """Estimated class precisions from recalls and two class distributions.

    ``raw`` is the unclamped estimate; values above 1 reveal inconsistent
    distribution estimates and are clamped to 1 in ``precision`` and flagged
    in ``clamped``.  ``macro_precision`` averages the clamped estimates.
    """

    raw: np.ndarray
    precision: np.ndarray
    clamped: np.ndarray
    macro_precision: float

    def to_dict(self, labels: Sequence[str] | None = None) -> dict:
        labels = list(labels) if labels is not None else [str(i) for i in range(len(self.raw))]
        return {
            "labels": labels,
            "precision": [float(v) for v in self.precision],
            "raw": [float(v) for v in self.raw],
            "clamped": [bool(v) for v in self.clamped],
            "macro_precision": float(self.macro_precision),
        }


def _distribution(v, name, positive=False) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or np.isnan(v).any():
        raise ClfEvalError(f"{name} must be a vector of numbers")
    if np.any(v < 0):
        raise ClfEvalError(f"{name} has a negative entry")
    if positive and np.any(v == 0):
        k = int(np.flatnonzero(v == 0)[0])
        raise ClfEvalError(f"{name} has zero probability for class index {k}")
    if abs(v.sum() - 1.0) > 1e-9:
        raise ClfEvalError(f"{name} sums to {v.sum():.12g}, not 1")
    return v


def project_precision(recalls, est_class_dist, est_pred_dist) -> Projection:
    """``P_i = R_i * P(c = i) / P(f -> i)`` for every class.

    Exact when both distributions come from the matrix the recalls were
    measured on; otherwise an approximation.
    """
    recalls = np.asarray(recalls, dtype=np.float64)
    class_dist = _distribution(est_class_dist, "class distribution")
    pred_dist = _distribution(est_pred_dist, "prediction distribution", positive=True)
    if not (recalls.shape == class_dist.shape == pred_dist.shape):
        raise ClfEvalError("recalls and distributions must have the same length")
    if np.any((recalls < 0) | (recalls > 1)) or np.isnan(recalls).any():
        raise ClfEvalError("recalls must lie in [0, 1]")
    raw = recalls * (class_dist / pred_dist)
    clamped = raw > 1.0
    precision = np.minimum(raw, 1.0)
    return Projection(raw, precision, clamped, float(precision.mean()))


# --------------------------------------------------------------------------
# published ranking fixture


def load_published_ranking(path=None) -> dict:
    """Published shared-task scores (percent) bundled with the package."""
    if path is None:
        text = resources.files("clfeval").joinpath("data/published_ranking.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return json.loads(text)


@dataclass(frozen=True)
class ConsistencyCheck:
    system: str
    check: str
    published: float
    derived: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.published - self.derived) <= self.tolerance


def published_consistency(data: dict | None = None) -> list[ConsistencyCheck]:
    """Identities that must hold between published columns up to rounding.

    Every published value is rounded to ``decimals`` places, so each
    tolerance is the output rounding plus the input rounding propagated
    through the identity (first-order bound).

    - ``mean_recall``: mean of class recalls equals macro recall; the
      tolerance is the plain rounding half-unit.
    - ``geometric_recall`` / ``harmonic_recall``: power means of the class
      recalls equal the geometric / harmonic macro recall.
    - ``macro_f1_prime``: harmonic mean of macro recall and macro precision.
    - ``calibrated_kappa``: kappa after calibration is
      ``(macR - 1/n) / (1 - 1/n)``.
    """
    data = load_published_ranking() if data is None else data
    half = 0.5 * 10.0 ** -int(data.get("decimals", 1))
    n = int(data["n_classes"])
    chance = 100.0 / n
    out = []
    for row in data["rows"]:
        sys_id = row["system"]
        scores = row["scores"]
        r = np.asarray(row["class_recall"], dtype=np.float64)
        mac_r = scores["macro_recall:p=1"]
        out.append(ConsistencyCheck(sys_id, "mean_recall", mac_r, float(r.mean()), half))
        if "macro_recall:p=0" in scores:
            g = float(power_mean(r, 0.0))
            slope = float(np.sum(g / (len(r) * r)))
            out.append(ConsistencyCheck(sys_id, "geometric_recall", scores["macro_recall:p=0"], g, half * (1 + slope)))
        if "macro_recall:p=-1" in scores:
            h = float(power_mean(r, -1.0))
            slope = float(np.sum(h**2 / (len(r) * r**2)))
            out.append(ConsistencyCheck(sys_id, "harmonic_recall", scores["macro_recall:p=-1"], h, half * (1 + slope)))
        if "macro_f1_prime" in scores and "macro_precision" in scores:
            p = scores["macro_precision"]
            hm = 2 * mac_r * p / (mac_r + p)
            slope = (2 * p**2 + 2 * mac_r**2) / (mac_r + p) ** 2
            out.append(ConsistencyCheck(sys_id, "macro_f1_prime", scores["macro_f1_prime"], hm, half * (1 + slope)))
        if "kappa~" in scores:
            factor = 1.0 / (1.0 - 1.0 / n)
            expected = (mac_r - chance) * factor
            out.append(ConsistencyCheck(sys_id, "calibrated_kappa", scores["kappa~"], expected, half * (1 + factor)))
    return out
