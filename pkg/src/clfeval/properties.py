"""Executable checks for the five metric properties.

Each check samples integer confusion matrices (deterministically from a
seed), evaluates the metric with the batch kernels and either reports that
the property held on the whole sample or returns a replayable
:class:`Witness`.  Sampling can refute a property but never prove one, which
is why passing checks say ``holds_on_sample``.

Properties
----------
monotonicity
    one more correct item never lowers the score, one more error never
    raises it (unit-mass increments on every cell).
class_sensitivity
    two placements of equal correctness in different cells can change the
    score; a metric without it is a "micro" metric.
class_decomposability
    the metric equals a power mean of per-class scores ``g(row_i, col_i, i)``.
    Only declared decompositions are verified.
prevalence_invariance
    scaling the columns by any positive diagonal matrix leaves the score
    unchanged.
chance_correction
    every prevalence-blind random classifier scores at most a baseline that
    depends on the number of classes only.
"""
from __future__ import annotations

import enum
import functools
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels
from .exceptions import ClfEvalError
from .gradients import analytic_gradient
from .kernels import _numpy as np_kernels
from .matrix import ConfusionMatrix, LabelSpace, scale
from .metrics import (
    TABLE_METRICS,
    MetricId,
    MetricKind,
    metric_value,
    parse_metric,
)

__all__ = [
    "PropertyId",
    "Verdict",
    "SearchBudget",
    "Witness",
    "PropertyVerdict",
    "PropertyRow",
    "PropertyReport",
    "DEFAULT_SEED",
    "DEFAULT_BUDGET",
    "check_monotonicity",
    "check_class_sensitivity",
    "verify_decomposition",
    "check_prevalence_invariance",
    "check_chance_correction",
    "chance_profile",
    "find_counterexample",
    "check_property",
    "property_table",
    "load_expectations",
    "compare_with_expectations",
]

DEFAULT_SEED = 1729
MONOTONE_TOL = 1e-12
EQUALITY_TOL = 1e-9
_BLOCK = 1024


class PropertyId(str, enum.Enum):
    MONOTONICITY = "monotonicity"
    CLASS_SENSITIVITY = "class_sensitivity"
    CLASS_DECOMPOSABILITY = "class_decomposability"
    PREVALENCE_INVARIANCE = "prevalence_invariance"
    CHANCE_CORRECTION = "chance_correction"

    @property
    def short(self) -> str:
        return _SHORT[self]


_SHORT = {
    PropertyId.MONOTONICITY: "PI",
    PropertyId.CLASS_SENSITIVITY: "PII",
    PropertyId.CLASS_DECOMPOSABILITY: "PIII",
    PropertyId.PREVALENCE_INVARIANCE: "PIV",
    PropertyId.CHANCE_CORRECTION: "PV",
}


class Verdict(str, enum.Enum):
    HOLDS_ON_SAMPLE = "holds_on_sample"
    REFUTED = "refuted"
    DECLARED_AND_VERIFIED = "declared_and_verified"
    NOT_DECLARED = "not_declared"
    # existential property (class sensitivity) with no witness in the sample
    NOT_OBSERVED = "not_observed"

    @property
    def passed(self) -> bool:
        return self in (Verdict.HOLDS_ON_SAMPLE, Verdict.DECLARED_AND_VERIFIED)


@dataclass(frozen=True)
class SearchBudget:
    trials: int = 10_000
    seed: int = DEFAULT_SEED
    matrix_size_range: tuple[int, int] = (2, 5)
    mass_range: tuple[int, int] = (0, 100)

    def __post_init__(self):
        if int(self.trials) < 1:
            raise ClfEvalError("trials must be at least 1")
        lo, hi = (int(x) for x in self.matrix_size_range)
        if lo < 2 or hi < lo:
            raise ClfEvalError("matrix_size_range must satisfy 2 <= min <= max")
        mlo, mhi = (int(x) for x in self.mass_range)
        if mlo < 0 or mhi < mlo or mhi == 0:
            raise ClfEvalError("mass_range must satisfy 0 <= min <= max, max > 0")
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "matrix_size_range", (lo, hi))
        object.__setattr__(self, "mass_range", (mlo, mhi))

    @property
    def sizes(self) -> range:
        return range(self.matrix_size_range[0], self.matrix_size_range[1] + 1)

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "matrix_size_range": list(self.matrix_size_range),
            "mass_range": list(self.mass_range),
        }


DEFAULT_BUDGET = SearchBudget()


def _matrix_dict(m: ConfusionMatrix) -> dict:
    return {"labels": list(m.labels.labels), "matrix": m.to_float().cells.tolist()}


@dataclass(frozen=True)
class Witness:
    """Concrete evidence for (or against) a property.

    ``kind`` decides how the two compared matrices are built from ``matrix``:

    - ``unit_increment``: ``matrix`` vs ``matrix + delta at cells[0]``
    - ``placement_pair``: ``matrix + delta at cells[0]`` vs ``... at cells[1]``
    - ``scaling_pair``: ``scale(matrix, scalings[0])`` vs ``scale(matrix, scalings[1])``
    - ``decomposition``: direct metric vs the declared class mean, one matrix
    - ``chance``: a chance matrix vs the uniform-chance baseline matrix
    """

    kind: str
    matrix: ConfusionMatrix
    scores: tuple[float, float]
    cells: tuple[tuple[int, int], ...] = ()
    scalings: tuple[tuple[float, ...], ...] = ()
    delta: float = 1.0
    origin: str = "search"
    reference: ConfusionMatrix | None = None

    def variants(self) -> tuple[ConfusionMatrix, ConfusionMatrix]:
        m = self.matrix
        if self.kind == "unit_increment":
            return m, _bump(m, self.cells[0], self.delta)
        if self.kind == "placement_pair":
            return _bump(m, self.cells[0], self.delta), _bump(m, self.cells[1], self.delta)
        if self.kind == "scaling_pair":
            return scale(m, self.scalings[0]), scale(m, self.scalings[1])
        if self.kind == "chance":
            return m, self.reference
        raise ClfEvalError(f"witness kind {self.kind!r} has no matrix pair")

    def replay(self, metric) -> tuple[float, float]:
        """Recompute the stored score pair through :mod:`clfeval.metrics`."""
        metric = parse_metric(metric)
        if self.kind == "decomposition":
            raise ClfEvalError("decomposition witnesses are replayed with verify_decomposition")
        a, b = self.variants()
        return float(metric_value(metric, a)), float(metric_value(metric, b))

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "origin": self.origin,
            "matrix": _matrix_dict(self.matrix),
            "scores": [float(x) for x in self.scores],
        }
        if self.cells:
            out["cells"] = [list(c) for c in self.cells]
            out["delta"] = self.delta
        if self.scalings:
            out["scalings"] = [list(map(float, s)) for s in self.scalings]
        if self.reference is not None:
            out["reference"] = _matrix_dict(self.reference)
        return out


def _bump(m: ConfusionMatrix, cell, delta) -> ConfusionMatrix:
    cells = m.cells.copy()
    cells[cell] += delta
    return ConfusionMatrix(m.labels, cells)


@dataclass(frozen=True)
class PropertyVerdict:
    property: PropertyId
    metric: MetricId
    verdict: Verdict
    witness: Witness | None = None
    trials: int = 0
    skipped: int = 0
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "property": self.property.value,
            "metric": self.metric.name,
            "verdict": self.verdict.value,
            "trials": self.trials,
            "skipped": self.skipped,
            "witness": None if self.witness is None else self.witness.to_dict(),
            "details": _jsonable(self.details),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if not np.isfinite(obj) else float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# --------------------------------------------------------------------------
# deterministic samples


@dataclass(frozen=True)
class _Group:
    n: int
    trial_index: np.ndarray
    cells: np.ndarray


@functools.lru_cache(maxsize=32)
def _sample(budget: SearchBudget) -> tuple[_Group, ...]:
    """Integer matrices, uniform per cell; trial t depends only on (seed, t)."""
    lo, hi = budget.matrix_size_range
    mlo, mhi = budget.mass_range
    per_size: dict[int, list] = {n: [] for n in budget.sizes}
    index: dict[int, list] = {n: [] for n in budget.sizes}
    for start in range(0, budget.trials, _BLOCK):
        count = min(_BLOCK, budget.trials - start)
        rng = np.random.default_rng([budget.seed, start // _BLOCK, 0])
        sizes = rng.integers(lo, hi + 1, size=count)
        for k, n in enumerate(sizes):
            per_size[int(n)].append(rng.integers(mlo, mhi + 1, size=(n, n)))
            index[int(n)].append(start + k)
    groups = []
    for n in budget.sizes:
        if per_size[n]:
            cells = np.stack(per_size[n]).astype(np.float64)
            cells.setflags(write=False)
            groups.append(_Group(n, np.asarray(index[n]), cells))
    return tuple(groups)


def _scalings(budget: SearchBudget, group: _Group) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng([budget.seed, group.n, 2])
    shape = (2, len(group.trial_index), group.n)
    lam = np.exp2(rng.uniform(-4.0, 4.0, size=shape))
    return lam[0], lam[1]


def _labels(n: int) -> LabelSpace:
    return LabelSpace.default(n)


def _kernel_labels(metric: MetricId, n: int):
    if metric.kind is MetricKind.CLASS_RECALL:
        return _labels(n)
    return None


def _batch(cells, metric):
    return kernels.batch_metric(cells, metric, _kernel_labels(metric, cells.shape[1]))


def _batch_inc(cells, metric, delta=1.0):
    return kernels.batch_increments(cells, metric, _kernel_labels(metric, cells.shape[1]), delta)


def _scalar(metric, m: ConfusionMatrix) -> float:
    try:
        return float(metric_value(metric, m))
    except ClfEvalError:
        return float("nan")


# --------------------------------------------------------------------------
# seed constructions

# error at (pred z, gold y) raises Kappa and MCC
_ZERO_AGREEMENT = np.array([[10, 43, 0], [1, 1, 0], [0, 0, 1]], dtype=np.float64)
# a class with high precision-weighted F1 term and one with no correct items:
# an error moved into the first one's column raises weighted F1
_WEIGHTED_F1_SEED = np.array([[0, 0], [10, 1]], dtype=np.float64)
_MONOTONICITY_SEEDS = (
    ("seed:zero_agreement", _ZERO_AGREEMENT, (2, 1)),
    ("seed:weighted_f1", _WEIGHTED_F1_SEED, (0, 1)),
)
# column y doubled
_PREVALENCE_SEEDS = (("seed:running_example", np.array([[15, 5], [10, 10]], dtype=np.float64), (1.0, 1.0), (1.0, 2.0)),)


# --------------------------------------------------------------------------
# monotonicity


def _monotone_margin(base, inc):
    """Largest directional violation per matrix (NaN-safe, > tol means refuted)."""
    n = inc.shape[1]
    diff = inc - base[:, None, None]
    eye = np.eye(n, dtype=bool)
    directed = np.where(eye, -diff, diff)
    directed = np.where(np.isnan(directed), -np.inf, directed)
    return directed


def _unit_witness(metric, cells, cell, origin) -> Witness | None:
    m = ConfusionMatrix(_labels(cells.shape[0]), cells)
    w = Witness("unit_increment", m, (0.0, 0.0), cells=(cell,), origin=origin)
    before, after = (_scalar(metric, x) for x in w.variants())
    if not (np.isfinite(before) and np.isfinite(after)):
        return None
    i, j = cell
    violated = (after - before < -MONOTONE_TOL) if i == j else (after - before > MONOTONE_TOL)
    if not violated:
        return None
    return Witness("unit_increment", m, (before, after), cells=(cell,), origin=origin)


def _still_monotone_violation(metric, w: Witness) -> Witness | None:
    return _unit_witness(metric, w.matrix.cells, w.cells[0], w.origin)


def _search_monotonicity(metric, budget, use_seeds=True, hill_climb=True):
    trials = 0
    skipped = 0
    if use_seeds:
        for origin, cells, cell in _MONOTONICITY_SEEDS:
            trials += 1
            w = _unit_witness(metric, cells, cell, origin)
            if w is not None:
                return w, trials, skipped, {}
    best = None
    candidates = []
    for group in _sample(budget):
        base = _batch(group.cells, metric)
        inc = _batch_inc(group.cells, metric)
        undefined = np.isnan(base)
        skipped += int(undefined.sum())
        trials += int((~undefined).sum())
        directed = _monotone_margin(base, inc)
        directed[undefined] = -np.inf
        flat = directed.reshape(len(base), -1)
        margin = flat.max(axis=1)
        hits = np.flatnonzero(margin > MONOTONE_TOL)
        for k in hits:
            t = group.trial_index[k]
            if best is not None and t >= best[0]:
                break
            cell = divmod(int(np.argmax(flat[k])), group.n)
            w = _unit_witness(metric, group.cells[k], cell, "search")
            if w is not None:
                best = (t, w)
                break
        order = np.argsort(-margin, kind="stable")[:8]
        candidates.extend((float(margin[k]), group.n, group.cells[k]) for k in order if np.isfinite(margin[k]))
    if best is not None:
        return best[1], trials, skipped, {}
    if hill_climb and candidates:
        w, steps = _hill_climb(metric, candidates, budget)
        trials += steps
        if w is not None:
            return w, trials, skipped, {"hill_climb_evaluations": steps}
        return None, trials, skipped, {"hill_climb_evaluations": steps}
    return None, trials, skipped, {}


def _hill_climb(metric, candidates, budget, max_steps=40):
    """Greedy single-cell moves that push the monotonicity margin upwards."""
    evaluations = 0
    cap = 4 * budget.mass_range[1]
    by_size: dict[int, list] = {}
    for margin, n, cells in sorted(candidates, key=lambda c: -c[0])[:32]:
        by_size.setdefault(n, []).append(np.array(cells, dtype=np.float64))
    for n, starts in sorted(by_size.items()):
        current = np.stack(starts)
        base = _batch(current, metric)
        score = _monotone_margin(base, _batch_inc(current, metric)).reshape(len(current), -1).max(axis=1)
        for _ in range(max_steps):
            moves = []
            for k in range(len(current)):
                for i in range(n):
                    for j in range(n):
                        v = current[k, i, j]
                        for nv in {v + 1, v - 1, 2 * v + 1, v // 2}:
                            if 0 <= nv <= cap and nv != v:
                                cand = current[k].copy()
                                cand[i, j] = nv
                                moves.append((k, cand))
            if not moves:
                break
            stack = np.stack([c for _, c in moves])
            mbase = _batch(stack, metric)
            directed = _monotone_margin(mbase, _batch_inc(stack, metric)).reshape(len(stack), -1)
            directed[np.isnan(mbase)] = -np.inf
            margins = directed.max(axis=1)
            evaluations += len(stack)
            improved = False
            owners = np.array([k for k, _ in moves])
            for k in range(len(current)):
                mine = np.flatnonzero(owners == k)
                pick = mine[np.argmax(margins[mine])]
                if margins[pick] > score[k]:
                    current[k] = stack[pick]
                    score[k] = margins[pick]
                    improved = True
                    if margins[pick] > MONOTONE_TOL:
                        cell = divmod(int(np.argmax(directed[pick])), n)
                        w = _unit_witness(metric, stack[pick], cell, "hill_climb")
                        if w is not None:
                            return w, evaluations
            if not improved:
                break
    return None, evaluations


def _gradient_signs(metric, budget, limit=200):
    checked = violations = 0
    if metric.calibrated:
        return {}
    for group in _sample(budget):
        for cells in group.cells:
            if checked >= limit:
                break
            if np.any(cells.sum(axis=0) == 0) or np.any(cells.sum(axis=1) == 0) or np.any(np.diagonal(cells) == 0):
                continue
            try:
                grad = analytic_gradient(metric, cells)
            except ClfEvalError:
                continue
            checked += 1
            eye = np.eye(group.n, dtype=bool)
            scale_ = max(float(np.abs(grad).max()), 1e-300)
            bad = np.where(eye, grad < -1e-12 * scale_, grad > 1e-12 * scale_)
            violations += int(bad.any())
    return {"gradient_checked": checked, "gradient_sign_violations": violations}


def check_monotonicity(metric, budget: SearchBudget = DEFAULT_BUDGET, *, use_seeds: bool = True) -> PropertyVerdict:
    metric = parse_metric(metric)
    w, trials, skipped, details = _search_monotonicity(metric, budget, use_seeds)
    details = {**details, **_gradient_signs(metric, budget)}
    verdict = Verdict.REFUTED if w is not None else Verdict.HOLDS_ON_SAMPLE
    return PropertyVerdict(PropertyId.MONOTONICITY, metric, verdict, w, trials, skipped, details)


# --------------------------------------------------------------------------
# class sensitivity


def _pair_witness(metric, cells, c1, c2) -> Witness | None:
    m = ConfusionMatrix(_labels(cells.shape[0]), cells)
    w = Witness("placement_pair", m, (0.0, 0.0), cells=(c1, c2))
    a, b = (_scalar(metric, x) for x in w.variants())
    if np.isfinite(a) and np.isfinite(b) and abs(a - b) > MONOTONE_TOL:
        return Witness("placement_pair", m, (a, b), cells=(c1, c2))
    return None


def check_class_sensitivity(metric, budget: SearchBudget = DEFAULT_BUDGET) -> PropertyVerdict:
    """Look for two equally-correct placements in different cells that score differently."""
    metric = parse_metric(metric)
    trials = skipped = 0
    best = None
    for group in _sample(budget):
        inc = _batch_inc(group.cells, metric)
        n = group.n
        diag = np.diagonal(inc, axis1=1, axis2=2)
        off = inc[:, ~np.eye(n, dtype=bool)]
        undefined = np.isnan(diag).any(axis=1) | np.isnan(off).any(axis=1)
        skipped += int(undefined.sum())
        trials += int((~undefined).sum())
        spread_d = np.nanmax(diag, axis=1) - np.nanmin(diag, axis=1)
        spread_o = np.nanmax(off, axis=1) - np.nanmin(off, axis=1)
        hits = np.flatnonzero(~undefined & ((spread_d > MONOTONE_TOL) | (spread_o > MONOTONE_TOL)))
        off_cells = [(i, j) for i in range(n) for j in range(n) if i != j]
        for k in hits:
            t = group.trial_index[k]
            if best is not None and t >= best[0]:
                break
            if spread_d[k] > MONOTONE_TOL:
                c1 = (int(np.argmin(diag[k])),) * 2
                c2 = (int(np.argmax(diag[k])),) * 2
            else:
                c1 = off_cells[int(np.argmin(off[k]))]
                c2 = off_cells[int(np.argmax(off[k]))]
            w = _pair_witness(metric, group.cells[k], c1, c2)
            if w is not None:
                best = (t, w)
                break
    if best is None:
        return PropertyVerdict(PropertyId.CLASS_SENSITIVITY, metric, Verdict.NOT_OBSERVED, None, trials, skipped)
    return PropertyVerdict(PropertyId.CLASS_SENSITIVITY, metric, Verdict.HOLDS_ON_SAMPLE, best[1], trials, skipped)


# --------------------------------------------------------------------------
# class decomposability


def _ratio(num, den):
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den != 0)
    return out


def g_recall(row, col, x):
    """Class recall: ``row[x] / sum(col)``."""
    return _ratio(row[..., x], col.sum(axis=-1))


def g_precision(row, col, x):
    """Class precision: ``row[x] / sum(row)``."""
    return _ratio(row[..., x], row.sum(axis=-1))


def g_f1(row, col, x):
    """Class F1: ``2 row[x] / (sum(row) + sum(col))``."""
    return _ratio(2.0 * row[..., x], row.sum(axis=-1) + col.sum(axis=-1))


@dataclass(frozen=True)
class Decomposition:
    g: Callable
    exponent: float
    on_calibrated: bool = False


def declared_decomposition(metric) -> Decomposition | None:
    """Known ``(g, p)`` such that the metric is the ``p``-mean of ``g`` over classes."""
    metric = parse_metric(metric)
    kind = metric.kind
    if kind is MetricKind.MACRO_RECALL:
        return Decomposition(g_recall, metric.mean_exponent, metric.calibrated)
    if kind is MetricKind.MACRO_PRECISION:
        return Decomposition(g_precision, 1.0, metric.calibrated)
    if kind is MetricKind.MACRO_F1:
        return Decomposition(g_f1, 1.0, metric.calibrated)
    if metric.calibrated and kind in (MetricKind.ACCURACY, MetricKind.MICRO_F1):
        # accuracy after calibration is macro recall of the calibrated matrix
        return Decomposition(g_recall, 1.0, True)
    if metric.calibrated and kind is MetricKind.WEIGHTED_F1:
        return Decomposition(g_f1, 1.0, True)
    return None


def class_mean(decomposition: Decomposition, cells: np.ndarray) -> np.ndarray:
    """Evaluate the generalised class mean for a stack of matrices."""
    cells = np.asarray(cells, dtype=np.float64)
    if decomposition.on_calibrated:
        cells = np_kernels.calibrate_batch(cells)
    n = cells.shape[1]
    scores = np.stack([decomposition.g(cells[:, x, :], cells[:, :, x], x) for x in range(n)], axis=1)
    with np.errstate(all="ignore"):
        return np_kernels._power_mean(scores, decomposition.exponent)


def verify_decomposition(metric, budget: SearchBudget = DEFAULT_BUDGET) -> PropertyVerdict:
    metric = parse_metric(metric)
    decl = declared_decomposition(metric)
    if decl is None:
        return PropertyVerdict(PropertyId.CLASS_DECOMPOSABILITY, metric, Verdict.NOT_DECLARED)
    trials = skipped = 0
    worst = 0.0
    for group in _sample(budget):
        direct = _batch(group.cells, metric)
        mean = class_mean(decl, group.cells)
        undefined = np.isnan(direct) | np.isnan(mean)
        skipped += int(undefined.sum())
        trials += int((~undefined).sum())
        err = np.where(undefined, 0.0, np.abs(direct - mean))
        worst = max(worst, float(err.max(initial=0.0)))
        bad = np.flatnonzero(err > EQUALITY_TOL)
        if bad.size:
            k = bad[0]
            m = ConfusionMatrix(_labels(group.n), group.cells[k])
            w = Witness("decomposition", m, (float(direct[k]), float(mean[k])))
            return PropertyVerdict(
                PropertyId.CLASS_DECOMPOSABILITY, metric, Verdict.REFUTED, w, trials, skipped, {"max_abs_error": worst}
            )
    details = {"g": decl.g.__name__, "exponent": decl.exponent, "max_abs_error": worst}
    return PropertyVerdict(
        PropertyId.CLASS_DECOMPOSABILITY, metric, Verdict.DECLARED_AND_VERIFIED, None, trials, skipped, details
    )


# --------------------------------------------------------------------------
# prevalence invariance


def _scaling_witness(metric, cells, lam1, lam2, origin) -> Witness | None:
    m = ConfusionMatrix(_labels(cells.shape[0]), cells)
    lam1 = tuple(float(x) for x in lam1)
    lam2 = tuple(float(x) for x in lam2)
    w = Witness("scaling_pair", m, (0.0, 0.0), scalings=(lam1, lam2), origin=origin)
    a, b = (_scalar(metric, x) for x in w.variants())
    if np.isfinite(a) and np.isfinite(b) and abs(a - b) > EQUALITY_TOL:
        return Witness("scaling_pair", m, (a, b), scalings=(lam1, lam2), origin=origin)
    return None


def _search_prevalence(metric, budget, use_seeds=True):
    trials = skipped = 0
    if use_seeds:
        for origin, cells, lam1, lam2 in _PREVALENCE_SEEDS:
            trials += 1
            w = _scaling_witness(metric, cells, lam1, lam2, origin)
            if w is not None:
                return w, trials, skipped
    best = None
    for group in _sample(budget):
        lam1, lam2 = _scalings(budget, group)
        a = _batch(group.cells * lam1[:, None, :], metric)
        b = _batch(group.cells * lam2[:, None, :], metric)
        undefined = np.isnan(a) | np.isnan(b)
        skipped += int(undefined.sum())
        trials += int((~undefined).sum())
        hits = np.flatnonzero(~undefined & (np.abs(a - b) > EQUALITY_TOL))
        for k in hits:
            t = group.trial_index[k]
            if best is not None and t >= best[0]:
                break
            w = _scaling_witness(metric, group.cells[k], lam1[k], lam2[k], "search")
            if w is not None:
                best = (t, w)
                break
    return (best[1] if best else None), trials, skipped


def check_prevalence_invariance(metric, budget: SearchBudget = DEFAULT_BUDGET, *, use_seeds: bool = True) -> PropertyVerdict:
    metric = parse_metric(metric)
    w, trials, skipped = _search_prevalence(metric, budget, use_seeds)
    verdict = Verdict.REFUTED if w is not None else Verdict.HOLDS_ON_SAMPLE
    return PropertyVerdict(PropertyId.PREVALENCE_INVARIANCE, metric, verdict, w, trials, skipped)


# --------------------------------------------------------------------------
# counterexample minimisation


def _minimize(metric, w: Witness, check) -> Witness:
    """Greedy cell-mass reduction while the violation persists."""
    current = w
    changed = True
    while changed:
        changed = False
        cells = current.matrix.cells
        for i in range(cells.shape[0]):
            for j in range(cells.shape[1]):
                v = cells[i, j]
                for nv in (0.0, np.floor(v / 2), v - 1):
                    if nv < 0 or nv >= v:
                        continue
                    trial = cells.copy()
                    trial[i, j] = nv
                    cand = check(trial, current)
                    if cand is not None:
                        current = cand
                        cells = current.matrix.cells
                        changed = True
                        break
    return current


def find_counterexample(
    metric,
    property: PropertyId | str,
    budget: SearchBudget = DEFAULT_BUDGET,
    *,
    minimize: bool = True,
    use_seeds: bool = True,
) -> Witness | None:
    """Search for a violation of monotonicity or prevalence invariance.

    Seeds (known constructions) are tried first, then the random sample, then
    greedy hill-climbing.  With ``minimize`` the witness is shrunk cell by cell
    while the violation persists; its ``origin`` still names where it came from.
    """
    metric = parse_metric(metric)
    prop = PropertyId(property)
    if prop is PropertyId.MONOTONICITY:
        w, *_ = _search_monotonicity(metric, budget, use_seeds)
        if w is None or not minimize:
            return w

        def check(cells, cur):
            return _unit_witness(metric, cells, cur.cells[0], cur.origin)

        return _minimize(metric, w, check)
    if prop is PropertyId.PREVALENCE_INVARIANCE:
        w, *_ = _search_prevalence(metric, budget, use_seeds)
        if w is None or not minimize:
            return w

        def check(cells, cur):
            return _scaling_witness(metric, cells, *cur.scalings, cur.origin)

        return _minimize(metric, w, check)
    raise ClfEvalError(f"counterexample search supports monotonicity and prevalence_invariance, not {prop.value}")


# --------------------------------------------------------------------------
# chance correction


def _simplex_grid(n: int) -> list[np.ndarray]:
    uniform = np.full(n, 1.0 / n)
    grid = [uniform]
    for k in range(n):
        for weight in (0.5, 0.9, 0.99):
            v = np.full(n, (1.0 - weight) / (n - 1))
            v[k] = weight
            grid.append(v)
    ramp = np.arange(1, n + 1, dtype=np.float64)
    grid.append(ramp / ramp.sum())
    grid.append(ramp[::-1] / ramp.sum())
    return grid


def _chance_stack(n: int, budget: SearchBudget):
    grid = _simplex_grid(n)
    zs, ps = [], []
    for p in grid:
        for z in grid:
            zs.append(z)
            ps.append(p)
    rng = np.random.default_rng([budget.seed, n, 5])
    count = budget.trials
    z_rand = rng.dirichlet(np.ones(n), size=count)
    p_rand = rng.dirichlet(np.ones(n), size=count)
    # every class predicted and present with positive probability
    z_rand = (z_rand + 1e-3) / (1.0 + n * 1e-3)
    p_rand = (p_rand + 1e-3) / (1.0 + n * 1e-3)
    # half of the random draws predict with the class distribution itself
    half = count // 2
    z_rand[:half] = p_rand[:half]
    z = np.concatenate([np.array(zs), z_rand])
    p = np.concatenate([np.array(ps), p_rand])
    return z, p


def _omega(metric, n):
    uniform = np.full((1, n, n), 1.0 / (n * n))
    return float(_batch(uniform, metric)[0])


def _omega_form(values: dict) -> str | None:
    if all(abs(v) <= EQUALITY_TOL for v in values.values()):
        return "0"
    if all(abs(v - 1.0 / n) <= EQUALITY_TOL for n, v in values.items()):
        return "1/n"
    return None


def check_chance_correction(metric, n: int, budget: SearchBudget = DEFAULT_BUDGET) -> PropertyVerdict:
    """Score expected chance matrices ``outer(z, p)`` against the uniform baseline.

    The baseline ``omega(n)`` is the score of the uniform random classifier on
    uniformly distributed classes.  The property holds on the sample when no
    chance matrix beats it; ``strict`` means every chance matrix scores it.
    """
    metric = parse_metric(metric)
    if n < 2:
        raise ClfEvalError("chance correction needs n >= 2")
    z, p = _chance_stack(n, budget)
    stack = z[:, :, None] * p[:, None, :]
    values = _batch(stack, metric)
    defined = ~np.isnan(values)
    omega = _omega(metric, n)
    vals = values[defined]
    zd, pd = z[defined], p[defined]
    vmax = float(vals.max()) if vals.size else float("nan")
    vmin = float(vals.min()) if vals.size else float("nan")
    at_max = vals >= omega - EQUALITY_TOL
    details = {
        "n": n,
        "omega": omega,
        "max": vmax,
        "min": vmin,
        "strict": bool(vmax - vmin <= EQUALITY_TOL),
        "max_attained": bool(at_max.any()),
        "max_only_when_z_eq_p": bool(at_max.any() and np.all(np.abs(zd[at_max] - pd[at_max]).max(axis=1) <= 1e-9)),
    }
    trials = int(defined.sum())
    skipped = int((~defined).sum())
    if vmax > omega + EQUALITY_TOL:
        k = int(np.flatnonzero(defined)[np.argmax(vals)])
        m = ConfusionMatrix(_labels(n), stack[k])
        ref = ConfusionMatrix(_labels(n), np.full((n, n), 1.0 / (n * n)))
        w = Witness("chance", m, (0.0, 0.0), reference=ref)
        a, b = (_scalar(metric, x) for x in w.variants())
        w = Witness("chance", m, (a, b), reference=ref)
        return PropertyVerdict(PropertyId.CHANCE_CORRECTION, metric, Verdict.REFUTED, w, trials, skipped, details)
    return PropertyVerdict(PropertyId.CHANCE_CORRECTION, metric, Verdict.HOLDS_ON_SAMPLE, None, trials, skipped, details)


def chance_profile(metric, budget: SearchBudget = DEFAULT_BUDGET, sizes: Iterable[int] | None = None) -> PropertyVerdict:
    """Chance correction over several class counts; adds ``complete`` and ``omega_form``."""
    metric = parse_metric(metric)
    sizes = list(budget.sizes if sizes is None else sizes)
    per_n = [check_chance_correction(metric, n, budget) for n in sizes]
    refuted = [v for v in per_n if v.verdict is Verdict.REFUTED]
    omegas = {v.details["n"]: v.details["omega"] for v in per_n}
    strict = all(v.details["strict"] for v in per_n)
    constant = max(omegas.values()) - min(omegas.values()) <= EQUALITY_TOL
    details = {
        "omega_form": _omega_form(omegas),
        "strict": strict,
        "complete": bool(strict and constant),
        "per_n": {v.details["n"]: v.details for v in per_n},
    }
    trials = sum(v.trials for v in per_n)
    skipped = sum(v.skipped for v in per_n)
    if refuted:
        return PropertyVerdict(
            PropertyId.CHANCE_CORRECTION, metric, Verdict.REFUTED, refuted[0].witness, trials, skipped, details
        )
    return PropertyVerdict(PropertyId.CHANCE_CORRECTION, metric, Verdict.HOLDS_ON_SAMPLE, None, trials, skipped, details)


# --------------------------------------------------------------------------
# table


def check_property(metric, prop: PropertyId | str, budget: SearchBudget = DEFAULT_BUDGET) -> PropertyVerdict:
    prop = PropertyId(prop)
    if prop is PropertyId.MONOTONICITY:
        return check_monotonicity(metric, budget)
    if prop is PropertyId.CLASS_SENSITIVITY:
        return check_class_sensitivity(metric, budget)
    if prop is PropertyId.CLASS_DECOMPOSABILITY:
        return verify_decomposition(metric, budget)
    if prop is PropertyId.PREVALENCE_INVARIANCE:
        return check_prevalence_invariance(metric, budget)
    return chance_profile(metric, budget)


@dataclass(frozen=True)
class PropertyRow:
    metric: MetricId
    verdicts: dict
    calibrated: dict

    def symbol(self, prop: PropertyId) -> str:
        v = self.verdicts.get(prop)
        if v is None:
            return ""
        if v.verdict.passed:
            text = "✓"
            if prop is PropertyId.CHANCE_CORRECTION:
                text += _chance_suffix(v)
            return text
        text = "✗"
        cal = self.calibrated.get(prop)
        if cal is not None and cal.verdict.passed:
            text += "(✓)"
        return text

    def to_dict(self) -> dict:
        return {
            "metric": self.metric.name,
            "properties": {p.value: v.to_dict() for p, v in self.verdicts.items()},
            "calibrated": {p.value: v.to_dict() for p, v in self.calibrated.items()},
        }


def _chance_suffix(v: PropertyVerdict) -> str:
    parts = []
    form = v.details.get("omega_form")
    if form:
        parts.append(form)
    if v.details.get("complete"):
        parts.append("complete")
    elif v.details.get("strict"):
        parts.append("strict")
    return ": " + ", ".join(parts) if parts else ""


@dataclass(frozen=True)
class PropertyReport:
    budget: SearchBudget
    rows: tuple[PropertyRow, ...]
    properties: tuple[PropertyId, ...] = tuple(PropertyId)

    def row(self, metric) -> PropertyRow:
        metric = parse_metric(metric)
        for r in self.rows:
            if r.metric == metric:
                return r
        raise KeyError(metric.name)

    def to_dict(self) -> dict:
        return {
            "budget": self.budget.to_dict(),
            "properties": [p.value for p in self.properties],
            "rows": [r.to_dict() for r in self.rows],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def render(self) -> str:
        """Text table, one row per metric, one column per property."""
        head = ["metric"] + [f"{p.short} ({p.value})" for p in self.properties]
        body = [[r.metric.name] + [r.symbol(p) for p in self.properties] for r in self.rows]
        widths = [max(len(str(x)) for x in col) for col in zip(head, *body)]
        lines = ["  ".join(str(c).ljust(w) for c, w in zip(head, widths)).rstrip()]
        lines.append("  ".join("-" * w for w in widths))
        for line in body:
            lines.append("  ".join(str(c).ljust(w) for c, w in zip(line, widths)).rstrip())
        lines.append("✗(✓): fails on raw matrices, holds after prevalence calibration")
        return "\n".join(lines)


def property_table(
    metric_set: Sequence = TABLE_METRICS,
    budget: SearchBudget = DEFAULT_BUDGET,
    properties: Sequence = tuple(PropertyId),
    *,
    recheck_calibrated: bool = True,
) -> PropertyReport:
    """Run every property check for every metric.

    Failed properties are re-run on the calibrated variant of the metric
    (``metric~``), which fills the ``(✓)`` part of the table.
    """
    properties = tuple(PropertyId(p) for p in properties)
    rows = []
    for metric in metric_set:
        metric = parse_metric(metric)
        verdicts = {}
        calibrated = {}
        for prop in properties:
            v = check_property(metric, prop, budget)
            verdicts[prop] = v
            if recheck_calibrated and not v.verdict.passed and not metric.calibrated:
                calibrated[prop] = check_property(metric.with_calibration(), prop, budget)
        rows.append(PropertyRow(metric, verdicts, calibrated))
    return PropertyReport(budget, tuple(rows), properties)


# --------------------------------------------------------------------------
# expectations


def load_expectations(path=None) -> dict:
    """Expected verdict pattern; defaults to the bundled summary table."""
    if path is None:
        text = resources.files("clfeval").joinpath("data/property_expectations.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    data = json.loads(text)
    return {parse_metric(k).name: v for k, v in data["metrics"].items()}


def _parse_expectation(text: str) -> tuple[str, dict]:
    parts = [x.strip() for x in text.split(":")]
    base = parts[0]
    quals = {}
    for q in parts[1:]:
        if q in ("strict", "complete"):
            quals[q] = True
        else:
            quals["omega_form"] = q
    return base, quals


def compare_with_expectations(report: PropertyReport, expectations: dict) -> list[str]:
    """List every cell where the report contradicts the expected pattern.

    Expectation strings: ``yes``, ``no``, ``no(yes)`` (fails raw, holds after
    calibration); chance correction may add ``:1/n`` or ``:0`` and
    ``:strict`` / ``:complete``.  A ``yes`` without a qualifier expects the
    qualifier to be absent.
    """
    problems = []
    for row in report.rows:
        exp = expectations.get(row.metric.name)
        if exp is None:
            continue
        for prop, verdict in row.verdicts.items():
            text = exp.get(prop.value)
            if text is None:
                continue
            base, quals = _parse_expectation(text)
            where = f"{row.metric.name} {prop.value}"
            if base == "yes":
                if not verdict.verdict.passed:
                    problems.append(f"{where}: expected to hold, got {verdict.verdict.value}")
                    continue
                if prop is PropertyId.CHANCE_CORRECTION:
                    d = verdict.details
                    if quals.get("omega_form") and d.get("omega_form") != quals["omega_form"]:
                        problems.append(f"{where}: baseline {d.get('omega_form')} != {quals['omega_form']}")
                    if d.get("complete") != quals.get("complete", False):
                        problems.append(f"{where}: complete={d.get('complete')}")
                    strict_expected = quals.get("strict", False) or quals.get("complete", False)
                    if d.get("strict") != strict_expected:
                        problems.append(f"{where}: strict={d.get('strict')}")
            elif base in ("no", "no(yes)"):
                if verdict.verdict.passed:
                    problems.append(f"{where}: expected to fail, got {verdict.verdict.value}")
                if base == "no(yes)":
                    cal = row.calibrated.get(prop)
                    if cal is None or not cal.verdict.passed:
                        got = "not rechecked" if cal is None else cal.verdict.value
                        problems.append(f"{where}: expected to hold after calibration, got {got}")
            else:
                raise ClfEvalError(f"bad expectation {text!r} for {where}")
    return problems
