"""Confusion matrix data model.

Rows are predictions and columns are gold labels: ``cells[i, j]`` holds the
mass of items predicted as ``i`` whose true class is ``j``.  Masses are
real-valued (ratios and soft counts are allowed).  Passing ``exact=True`` to
the constructors stores :class:`fractions.Fraction` cells, which every
rational metric honours, so golden values can be checked without rounding.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .exceptions import (
    ClfEvalError,
    EmptyInputError,
    UnknownLabelError,
    ZeroMassError,
    ZeroPrevalenceError,
)

__all__ = [
    "LabelSpace",
    "ConfusionMatrix",
    "ScalingVector",
    "ChanceModel",
    "as_matrix",
    "build_matrix",
    "class_masses",
    "normalize",
    "scale",
    "calibration_scaling",
    "calibrate",
    "chance_matrix",
]


@dataclass(frozen=True)
class LabelSpace:
    """Ordered, duplicate-free set of class labels (n >= 2)."""

    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(set(labels)) != len(labels):
            raise ClfEvalError(f"duplicate labels in {labels}")
        if len(labels) < 2:
            raise ClfEvalError("a label space needs at least two labels")

    @classmethod
    def infer(cls, labels: Iterable) -> "LabelSpace":
        return cls(tuple(sorted({str(x) for x in labels})))

    @classmethod
    def default(cls, n: int) -> "LabelSpace":
        return cls(tuple(str(i) for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise UnknownLabelError(label) from None

    def __contains__(self, label) -> bool:
        return str(label) in self.labels

    def __iter__(self):
        return iter(self.labels)

    def __len__(self):
        return len(self.labels)


def _to_cells(cells, exact: bool) -> np.ndarray:
    if exact:
        arr = np.asarray(cells, dtype=object)
        arr = np.vectorize(Fraction, otypes=[object])(arr) if arr.size else arr
    else:
        arr = np.array(cells, dtype=np.float64)
    return arr


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Immutable n x n mass matrix together with its label space."""

    labels: LabelSpace
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        cells = self.cells
        if not isinstance(cells, np.ndarray) or cells.dtype not in (np.float64, object):
            cells = np.array(cells, dtype=np.float64)
        n = self.labels.n
        if cells.shape != (n, n):
            raise ClfEvalError(f"matrix shape {cells.shape} does not match {n} labels")
        if cells.dtype != object and not np.all(np.isfinite(cells)):
            raise ClfEvalError("matrix cells must be finite")
        if np.any(cells < 0):
            raise ClfEvalError("matrix cells must be non-negative")
        cells = cells.copy()
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_array(cls, cells, labels=None, *, exact: bool = False) -> "ConfusionMatrix":
        arr = _to_cells(cells, exact)
        if arr.ndim != 2:
            raise ClfEvalError("matrix must be two-dimensional")
        if labels is None:
            labels = LabelSpace.default(arr.shape[0])
        elif not isinstance(labels, LabelSpace):
            labels = LabelSpace(tuple(labels))
        return cls(labels, arr)

    @property
    def n(self) -> int:
        return self.labels.n

    @property
    def exact(self) -> bool:
        return self.cells.dtype == object

    @property
    def total_mass(self):
        return self.cells.sum()

    def to_float(self) -> "ConfusionMatrix":
        if not self.exact:
            return self
        return ConfusionMatrix(self.labels, self.cells.astype(np.float64))

    def tolist(self) -> list[list]:
        return self.cells.tolist()

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return self.labels == other.labels and bool(np.array_equal(self.cells, other.cells))

    def __repr__(self):
        return f"ConfusionMatrix(labels={list(self.labels)}, cells={self.cells.tolist()})"


@dataclass(frozen=True, eq=False)
class ScalingVector:
    """Diagonal of a prevalence scaling matrix; one positive factor per class."""

    factors: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.factors)
        if f.dtype != object:
            f = f.astype(np.float64)
        if f.ndim != 1:
            raise ClfEvalError("scaling factors must be a vector")
        if np.any(f <= 0):
            raise ClfEvalError("scaling factors must be strictly positive")
        f = f.copy()
        f.setflags(write=False)
        object.__setattr__(self, "factors", f)

    def __len__(self):
        return len(self.factors)

    def __eq__(self, other):
        if not isinstance(other, ScalingVector):
            return NotImplemented
        return bool(np.array_equal(self.factors, other.factors))


@dataclass(frozen=True)
class ChanceModel:
    """Random classifier that predicts independently of the gold label.

    ``prediction_dist`` is how often each class is predicted, ``class_dist``
    the normalised class prevalences and ``mass`` the data set size.
    """

    prediction_dist: tuple[float, ...]
    class_dist: tuple[float, ...]
    mass: float = 1.0

    def __post_init__(self):
        z = tuple(float(x) for x in self.prediction_dist)
        p = tuple(float(x) for x in self.class_dist)
        object.__setattr__(self, "prediction_dist", z)
        object.__setattr__(self, "class_dist", p)
        if len(z) != len(p):
            raise ClfEvalError("prediction and class distributions differ in length")
        for name, vec in (("prediction_dist", z), ("class_dist", p)):
            if min(vec) < 0 or abs(sum(vec) - 1.0) > 1e-9:
                raise ClfEvalError(f"{name} must be a probability vector")
        if not self.mass > 0:
            raise ClfEvalError("mass must be positive")


def as_matrix(m) -> ConfusionMatrix:
    """Coerce nested sequences / arrays to a :class:`ConfusionMatrix`."""
    if isinstance(m, ConfusionMatrix):
        return m
    return ConfusionMatrix.from_array(m)


def build_matrix(pairs: Iterable[tuple], labels: LabelSpace | Sequence | None = None) -> ConfusionMatrix:
    """Count ``(gold, predicted)`` pairs into a confusion matrix.

    Without an explicit label space the sorted union of gold and predicted
    labels is used.
    """
    pairs = [(str(g), str(p)) for g, p in pairs]
    if not pairs:
        raise EmptyInputError("no (gold, predicted) pairs given")
    if labels is None:
        labels = LabelSpace.infer([x for pair in pairs for x in pair])
    elif not isinstance(labels, LabelSpace):
        labels = LabelSpace(tuple(labels))
    index = {lab: i for i, lab in enumerate(labels.labels)}
    cells = np.zeros((labels.n, labels.n), dtype=np.float64)
    for gold, pred in pairs:
        for lab in (gold, pred):
            if lab not in index:
                raise UnknownLabelError(lab)
        cells[index[pred], index[gold]] += 1
    return ConfusionMatrix(labels, cells)


def class_masses(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(bias, prevalence, correct)`` vectors (row sums, column sums, diagonal)."""
    m = as_matrix(m)
    return m.cells.sum(axis=1), m.cells.sum(axis=0), np.diagonal(m.cells).copy()


def normalize(m) -> ConfusionMatrix:
    m = as_matrix(m)
    total = m.total_mass
    if total == 0:
        raise ZeroMassError("cannot normalise a matrix with zero mass")
    return ConfusionMatrix(m.labels, m.cells / total)


def scale(m, lam: ScalingVector | Sequence) -> ConfusionMatrix:
    """Multiply column ``j`` (gold class j) by ``lam[j]``."""
    m = as_matrix(m)
    if not isinstance(lam, ScalingVector):
        lam = ScalingVector(np.asarray(lam, dtype=object if m.exact else np.float64))
    if len(lam) != m.n:
        raise ClfEvalError(f"scaling vector has {len(lam)} factors for {m.n} classes")
    return ConfusionMatrix(m.labels, m.cells * lam.factors[np.newaxis, :])


def calibration_scaling(m) -> ScalingVector:
    """Factors ``|S| / (n * prevalence(i))`` that equalise all class prevalences."""
    m = as_matrix(m)
    prevalence = m.cells.sum(axis=0)
    for i, value in enumerate(prevalence):
        if value == 0:
            raise ZeroPrevalenceError(m.labels.labels[i])
    return ScalingVector(m.total_mass / (m.n * prevalence))


def calibrate(m) -> ConfusionMatrix:
    """Prevalence-calibrated copy of ``m``: every column sums to ``|S| / n``."""
    m = as_matrix(m)
    return scale(m, calibration_scaling(m))


def chance_matrix(model: ChanceModel, labels: LabelSpace | None = None) -> ConfusionMatrix:
    """Expected confusion matrix of a prevalence-blind random classifier."""
    z = np.asarray(model.prediction_dist, dtype=np.float64)
    p = np.asarray(model.class_dist, dtype=np.float64)
    if labels is None:
        labels = LabelSpace.default(len(z))
    return ConfusionMatrix(labels, np.outer(z, p) * model.mass)
