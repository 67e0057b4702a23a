"""Classification metrics computed from a confusion matrix.

All functions accept a :class:`~clfeval.matrix.ConfusionMatrix` or anything
array-like.  Rational metrics keep :class:`~fractions.Fraction` cells exact;
metrics that need roots (MCC, non-arithmetic power means) return floats.

Zero-denominator convention: a class whose precision (recall, F1) has a zero
denominator scores 0 and the result carries the ``zero_denominator_class``
flag.  Macro recall is the exception and refuses zero-prevalence classes,
since it is meant to be prevalence invariant.
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .exceptions import (
    ClfEvalError,
    UndefinedMetricError,
    UnknownMetricError,
    ZeroMassError,
    ZeroPrevalenceError,
)
from .matrix import ConfusionMatrix, as_matrix, calibrate

__all__ = [
    "MetricKind",
    "MetricId",
    "MetricScore",
    "ClassScores",
    "ZERO_DENOMINATOR",
    "UNDEFINED",
    "class_prf",
    "accuracy",
    "micro_prf",
    "macro_recall",
    "balanced_accuracy",
    "macro_precision",
    "macro_f1",
    "macro_f1_prime",
    "weighted_f1",
    "kappa",
    "mcc",
    "bookmaker_win",
    "class_recall",
    "power_mean",
    "compute",
    "metric_value",
    "evaluate_all",
    "parse_metric",
    "DEFAULT_ROSTER",
    "TABLE_METRICS",
]

ZERO_DENOMINATOR = "zero_denominator_class"
UNDEFINED_CLASS_SKIPPED = "undefined_class_skipped"
UNDEFINED = "undefined_metric"

# exponents closer to zero than this use the geometric mean
GEOMETRIC_EPS = 1e-12


class MetricKind(str, enum.Enum):
    ACCURACY = "accuracy"
    MICRO_PRECISION = "micro_precision"
    MICRO_RECALL = "micro_recall"
    MICRO_F1 = "micro_f1"
    MACRO_RECALL = "macro_recall"
    MACRO_PRECISION = "macro_precision"
    MACRO_F1 = "macro_f1"
    MACRO_F1_PRIME = "macro_f1_prime"
    WEIGHTED_F1 = "weighted_f1"
    KAPPA = "kappa"
    MCC = "mcc"
    BOOKMAKER_WIN = "bookmaker_win"
    CLASS_RECALL = "class_recall"


def _format_exponent(p: float) -> str:
    return format(float(p), "g")


@dataclass(frozen=True)
class MetricId:
    """Identity of a metric.

    ``mean_exponent`` parameterises the macro recall power mean (1 arithmetic,
    0 geometric, -1 harmonic).  ``calibrated`` marks the variant evaluated on
    the prevalence-calibrated matrix (written with a ``~`` suffix) and
    ``label`` selects the class for ``class_recall``.
    """

    kind: MetricKind
    mean_exponent: float | None = None
    calibrated: bool = False
    label: str | None = None

    def __post_init__(self):
        kind = MetricKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is MetricKind.MACRO_RECALL:
            p = 1.0 if self.mean_exponent is None else float(self.mean_exponent)
            if not math.isfinite(p):
                raise ClfEvalError("mean exponent must be finite")
            object.__setattr__(self, "mean_exponent", p)
        elif self.mean_exponent is not None:
            raise ClfEvalError("mean_exponent only applies to macro_recall")
        if kind is MetricKind.CLASS_RECALL:
            if self.label is None:
                raise ClfEvalError("class_recall needs a label")
            object.__setattr__(self, "label", str(self.label))
        elif self.label is not None:
            raise ClfEvalError("label only applies to class_recall")

    @property
    def name(self) -> str:
        """Canonical string, e.g. ``macro_recall:p=1`` or ``kappa~``."""
        text = self.kind.value
        if self.kind is MetricKind.MACRO_RECALL:
            text += f":p={_format_exponent(self.mean_exponent)}"
        elif self.kind is MetricKind.CLASS_RECALL:
            text += f":{self.label}"
        return text + ("~" if self.calibrated else "")

    def with_calibration(self, calibrated: bool = True) -> "MetricId":
        return replace(self, calibrated=calibrated)

    def __str__(self):
        return self.name


_ALIASES = {
    "acc": ("accuracy", None),
    "micro_p": ("micro_precision", None),
    "micro_r": ("micro_recall", None),
    "macr": ("macro_recall", 1.0),
    "macro_recall": ("macro_recall", 1.0),
    "balanced_accuracy": ("macro_recall", 1.0),
    "gmacr": ("macro_recall", 0.0),
    "hmacr": ("macro_recall", -1.0),
    "macp": ("macro_precision", None),
    "macf1": ("macro_f1", None),
    "macf1'": ("macro_f1_prime", None),
    "macro_f1'": ("macro_f1_prime", None),
    "weightf1": ("weighted_f1", None),
    "bookmaker": ("bookmaker_win", None),
}

_MACRO_RECALL_RE = re.compile(r"^macro_recall:p=([-+0-9.eE]+)$")


def parse_metric(text: str | MetricId) -> MetricId:
    """Parse a canonical metric string (aliases and a trailing ``~`` allowed)."""
    if isinstance(text, MetricId):
        return text
    raw = text.strip()
    calibrated = raw.endswith("~")
    if calibrated:
        raw = raw[:-1]
    key = raw.lower()
    if key in _ALIASES:
        kind, p = _ALIASES[key]
        return MetricId(MetricKind(kind), p, calibrated)
    match = _MACRO_RECALL_RE.match(key)
    if match:
        try:
            p = float(match.group(1))
        except ValueError:
            raise UnknownMetricError(f"bad mean exponent in {text!r}") from None
        return MetricId(MetricKind.MACRO_RECALL, p, calibrated)
    if key.startswith("class_recall:"):
        return MetricId(MetricKind.CLASS_RECALL, calibrated=calibrated, label=raw.split(":", 1)[1])
    try:
        return MetricId(MetricKind(key), calibrated=calibrated)
    except ValueError:
        raise UnknownMetricError(f"unknown metric {text!r}") from None


@dataclass(frozen=True)
class MetricScore:
    metric: MetricId
    value: float
    flags: frozenset = field(default_factory=frozenset)
    error: str | None = None

    @property
    def defined(self) -> bool:
        return self.error is None

    def __float__(self):
        return float(self.value)

    def to_dict(self) -> dict:
        value = float(self.value) if self.defined else None
        return {"metric": self.metric.name, "value": value, "flags": sorted(self.flags)}


@dataclass(frozen=True)
class ClassScores:
    """Per-class precision, recall and F1 plus zero-denominator masks."""

    labels: tuple[str, ...]
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    precision_undefined: np.ndarray
    recall_undefined: np.ndarray
    f1_undefined: np.ndarray


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    out = np.zeros_like(num)
    ok = den != 0
    out[ok] = num[ok] / den[ok]
    return out, ~ok


def _checked(m) -> ConfusionMatrix:
    m = as_matrix(m)
    if m.total_mass == 0:
        raise ZeroMassError("metric undefined on a matrix with zero mass")
    return m


def _parts(m: ConfusionMatrix):
    cells = m.cells
    return cells.sum(axis=1), cells.sum(axis=0), np.diagonal(cells).copy(), cells.sum()


def class_prf(m) -> ClassScores:
    m = as_matrix(m)
    bias, prevalence, correct, _ = _parts(m)
    precision, p_bad = _safe_ratio(correct, bias)
    recall, r_bad = _safe_ratio(correct, prevalence)
    f1, f_bad = _safe_ratio(2 * correct, bias + prevalence)
    return ClassScores(m.labels.labels, precision, recall, f1, p_bad, r_bad, f_bad)


def _flags(*masks) -> frozenset:
    return frozenset({ZERO_DENOMINATOR}) if any(np.any(x) for x in masks) else frozenset()


def _mean(values: np.ndarray):
    return values.sum() / len(values)


def power_mean(values: Sequence, p: float):
    """Generalised mean of non-negative values.

    ``p`` within ``GEOMETRIC_EPS`` of zero is the geometric mean; for ``p <= 0``
    any zero value gives 0 (the continuous limit).
    """
    values = np.asarray(values)
    if p == 1:
        return _mean(values)
    if p <= 0 or abs(p) < GEOMETRIC_EPS:
        if np.any(values == 0):
            return 0.0
    if p == -1 and values.dtype == object:
        return len(values) / sum(1 / v for v in values)
    v = values.astype(np.float64)
    if abs(p) < GEOMETRIC_EPS:
        return float(np.exp(np.mean(np.log(v))))
    return float(np.mean(v**p) ** (1.0 / p))


def _id(kind: MetricKind, **kw) -> MetricId:
    return MetricId(kind, **kw)


def accuracy(m) -> MetricScore:
    m = _checked(m)
    _, _, correct, total = _parts(m)
    return MetricScore(_id(MetricKind.ACCURACY), correct.sum() / total)


def micro_prf(m) -> tuple[MetricScore, MetricScore, MetricScore]:
    """Micro precision, recall and F1; all three coincide with accuracy."""
    m = _checked(m)
    bias, prevalence, correct, _ = _parts(m)
    hits = correct.sum()
    p = hits / bias.sum()
    r = hits / prevalence.sum()
    f1 = 2 * p * r / (p + r) if p + r != 0 else p * 0
    # sum(bias) == sum(prevalence); harmonic mean of (a, a) is a
    f1 = p if p == r else f1
    return (
        MetricScore(_id(MetricKind.MICRO_PRECISION), p),
        MetricScore(_id(MetricKind.MICRO_RECALL), r),
        MetricScore(_id(MetricKind.MICRO_F1), f1),
    )


def macro_recall(m, mean_exponent: float = 1.0) -> MetricScore:
    m = _checked(m)
    _, prevalence, correct, _ = _parts(m)
    for i, value in enumerate(prevalence):
        if value == 0:
            raise ZeroPrevalenceError(m.labels.labels[i])
    recall = correct / prevalence
    value = power_mean(recall, mean_exponent)
    return MetricScore(_id(MetricKind.MACRO_RECALL, mean_exponent=mean_exponent), value)


def balanced_accuracy(m) -> MetricScore:
    """Alias for arithmetic macro recall (the usual reading of the name)."""
    return macro_recall(m, 1.0)


def macro_precision(m) -> MetricScore:
    m = _checked(m)
    bias, _, correct, _ = _parts(m)
    precision, bad = _safe_ratio(correct, bias)
    return MetricScore(_id(MetricKind.MACRO_PRECISION), _mean(precision), _flags(bad))


def macro_f1(m) -> MetricScore:
    """Mean of class-wise F1, i.e. ``2/n * sum(correct / (bias + prevalence))``."""
    m = _checked(m)
    bias, prevalence, correct, _ = _parts(m)
    f1, bad = _safe_ratio(2 * correct, bias + prevalence)
    return MetricScore(_id(MetricKind.MACRO_F1), _mean(f1), _flags(bad))


def macro_f1_prime(m) -> MetricScore:
    """Harmonic mean of macro precision and macro recall.

    Equivalently the harmonic mean of macro recall on ``m`` and on ``m.T``
    (classifier and reference as two annotators).  Both components use the
    zero-denominator convention.
    """
    m = _checked(m)
    scores = class_prf(m)
    r = _mean(scores.recall)
    p = _mean(scores.precision)
    flags = _flags(scores.recall_undefined, scores.precision_undefined)
    if r + p == 0:
        return MetricScore(_id(MetricKind.MACRO_F1_PRIME), r * 0, flags | {ZERO_DENOMINATOR})
    return MetricScore(_id(MetricKind.MACRO_F1_PRIME), 2 * r * p / (r + p), flags)


def weighted_f1(m) -> MetricScore:
    m = _checked(m)
    bias, prevalence, correct, total = _parts(m)
    f1, bad = _safe_ratio(2 * correct, bias + prevalence)
    return MetricScore(_id(MetricKind.WEIGHTED_F1), (prevalence * f1).sum() / total, _flags(bad))


def _agreement_terms(m: ConfusionMatrix):
    # unnormalised form: (r*s - p.b) etc. keeps integer counts exact
    bias, prevalence, correct, total = _parts(m)
    observed = correct.sum() * total
    chance = (prevalence * bias).sum()
    return observed, chance, total * total, (bias * bias).sum(), (prevalence * prevalence).sum()


def kappa(m) -> MetricScore:
    """Cohen's kappa, ``(accuracy - chance) / (1 - chance)``."""
    m = _checked(m)
    observed, chance, s2, _, _ = _agreement_terms(m)
    if chance >= s2:
        raise UndefinedMetricError("kappa undefined: chance agreement is 1")
    return MetricScore(_id(MetricKind.KAPPA), (observed - chance) / (s2 - chance))


def mcc(m) -> MetricScore:
    """Multi-class Matthews correlation coefficient (always a float)."""
    m = _checked(m)
    observed, chance, s2, bb, pp = _agreement_terms(m)
    spread_b = s2 - bb
    spread_p = s2 - pp
    if spread_b <= 0 or spread_p <= 0:
        raise UndefinedMetricError("mcc undefined: all mass in a single predicted or gold class")
    value = float(observed - chance) / math.sqrt(float(spread_b) * float(spread_p))
    return MetricScore(_id(MetricKind.MCC), value)


def bookmaker_win(m) -> MetricScore:
    """Net coins won betting every prediction at fair odds ``|S| / prevalence``."""
    m = _checked(m)
    mac = macro_recall(m, 1.0).value
    return MetricScore(_id(MetricKind.BOOKMAKER_WIN), m.total_mass * (m.n * mac - 1))


def class_recall(m, label) -> MetricScore:
    m = _checked(m)
    i = m.labels.index(label)
    scores = class_prf(m)
    flags = _flags(scores.recall_undefined[i])
    return MetricScore(_id(MetricKind.CLASS_RECALL, label=label), scores.recall[i], flags)


_SIMPLE = {
    MetricKind.ACCURACY: accuracy,
    MetricKind.MICRO_PRECISION: lambda m: micro_prf(m)[0],
    MetricKind.MICRO_RECALL: lambda m: micro_prf(m)[1],
    MetricKind.MICRO_F1: lambda m: micro_prf(m)[2],
    MetricKind.MACRO_PRECISION: macro_precision,
    MetricKind.MACRO_F1: macro_f1,
    MetricKind.MACRO_F1_PRIME: macro_f1_prime,
    MetricKind.WEIGHTED_F1: weighted_f1,
    MetricKind.KAPPA: kappa,
    MetricKind.MCC: mcc,
    MetricKind.BOOKMAKER_WIN: bookmaker_win,
}


def compute(metric: MetricId | str, m) -> MetricScore:
    """Evaluate one metric; raises on undefined values."""
    metric = parse_metric(metric)
    m = as_matrix(m)
    if metric.calibrated:
        m = calibrate(_checked(m))
    if metric.kind is MetricKind.MACRO_RECALL:
        score = macro_recall(m, metric.mean_exponent)
    elif metric.kind is MetricKind.CLASS_RECALL:
        score = class_recall(m, metric.label)
    else:
        score = _SIMPLE[metric.kind](m)
    return replace(score, metric=metric)


def metric_value(metric: MetricId | str, m) -> float:
    return compute(metric, m).value


def evaluate_all(m, metric_set: Iterable[MetricId | str]) -> list[MetricScore]:
    """Evaluate every metric in order; failures become flagged NaN entries."""
    m = as_matrix(m)
    out = []
    for metric in metric_set:
        metric = parse_metric(metric)
        try:
            out.append(compute(metric, m))
        except ClfEvalError as exc:
            out.append(MetricScore(metric, math.nan, frozenset({UNDEFINED}), str(exc)))
    return out


TABLE_METRICS = tuple(
    parse_metric(x)
    for x in (
        "accuracy",
        "macro_recall:p=1",
        "macro_recall:p=0",
        "macro_recall:p=-1",
        "macro_precision",
        "macro_f1",
        "macro_f1_prime",
        "weighted_f1",
        "kappa",
        "mcc",
    )
)

DEFAULT_ROSTER = TABLE_METRICS + (parse_metric("bookmaker_win"),)
