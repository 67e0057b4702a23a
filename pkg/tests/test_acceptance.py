"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (visible even under capture) with
the measured quantity and runtime, then asserts.
"""
import json
import time
from fractions import Fraction

import numpy as np
import pytest

from clfeval.analysis import SystemRun, correlation_matrix, published_consistency, score_systems
from clfeval.cli import EXIT_OK, main
from clfeval.gradients import analytic_gradient, numeric_gradient
from clfeval.matrix import ChanceModel, ConfusionMatrix, calibrate, chance_matrix
from clfeval.metrics import (
    DEFAULT_ROSTER,
    accuracy,
    kappa,
    macro_f1,
    macro_precision,
    macro_recall,
    mcc,
    micro_prf,
    parse_metric,
    weighted_f1,
)
from clfeval.metrics import metric_value

from conftest import ZERO_AGREEMENT, ZERO_AGREEMENT_PLUS_ERRORS


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail

    return emit


def _median_seconds(fn, repeat=25):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def _random_matrix(rng, n):
    """Non-negative cells with every class present; half integer, half real masses."""
    while True:
        if rng.random() < 0.5:
            cells = rng.integers(0, 30, size=(n, n)).astype(np.float64)
        else:
            cells = rng.random((n, n)) * rng.choice([1.0, 10.0, 100.0])
        if np.all(cells.sum(axis=0) > 0) and np.all(cells.sum(axis=1) > 0):
            return ConfusionMatrix.from_array(cells)


def test_criterion_1_worked_example_exact(report):
    a = ConfusionMatrix.from_array([[15, 5], [10, 10]], exact=True)
    b = ConfusionMatrix.from_array([[15, 10], [10, 20]], exact=True)
    va, vb = macro_precision(a).value, macro_precision(b).value
    elapsed = max(_median_seconds(lambda: macro_precision(a)), _median_seconds(lambda: macro_precision(b)))
    ok = va == Fraction(5, 8) and vb == Fraction(19, 30) and isinstance(va, Fraction) and elapsed < 1e-3
    report(1, ok, f"macP = {va}, {vb}; {elapsed * 1e6:.0f} us per call")


def test_criterion_2_kappa_mcc_counterexample(report):
    t7 = ConfusionMatrix.from_array(ZERO_AGREEMENT)
    t8 = ConfusionMatrix.from_array(ZERO_AGREEMENT_PLUS_ERRORS)
    assert np.array_equal(t8.cells - t7.cells, np.array([[0, 0, 0], [0, 0, 0], [0, 10, 0]]))
    k7, m7, k8, m8 = kappa(t7).value, mcc(t7).value, kappa(t8).value, mcc(t8).value
    elapsed = _median_seconds(lambda: (kappa(t8), mcc(t8)))
    ok = (
        k7 == 0.0
        and m7 == 0.0
        and abs(k8 - 0.02) <= 0.005
        and abs(m8 - 0.07) <= 0.005
        and k8 > k7
        and m8 > m7
        and elapsed < 1e-3
    )
    report(2, ok, f"zero-agreement kappa={k7} mcc={m7}; +10 at (z, y): kappa={k8:.4f} mcc={m8:.4f}; {elapsed * 1e6:.0f} us")


def test_criterion_3_published_table_consistency(report):
    checks = [c for c in published_consistency() if c.check == "mean_recall"]
    worst = max(abs(c.published - c.derived) for c in checks)
    systems = "".join(c.system for c in checks)
    ok = systems == "ABCDEFGH" and all(c.passed and c.tolerance == 0.05 for c in checks)
    report(3, ok, f"rows {systems}, worst |mean(r) - macR| = {worst:.4f}")


def test_criterion_4_identity_suite(report):
    rng = np.random.default_rng(20240601)
    worst = {"micro": 0.0, "acc~": 0.0, "kappa~": 0.0, "wf1~": 0.0}
    failures = []
    t0 = time.perf_counter()
    for k in range(1000):
        n = int(rng.integers(2, 7))
        m = _random_matrix(rng, n)
        acc = accuracy(m).value
        micro = micro_prf(m)
        worst["micro"] = max(worst["micro"], *(abs(s.value - acc) for s in micro))
        cal = calibrate(m)
        mac_r = macro_recall(m).value
        worst["acc~"] = max(worst["acc~"], abs(accuracy(cal).value - mac_r))
        worst["kappa~"] = max(worst["kappa~"], abs(kappa(cal).value - (mac_r - 1 / n) / (1 - 1 / n)))
        worst["wf1~"] = max(worst["wf1~"], abs(weighted_f1(cal).value - macro_f1(cal).value))
        kv, mv = kappa(m).value, mcc(m).value
        if not (np.isnan(kv) or np.isnan(mv)):
            if np.sign(kv) != np.sign(mv) or abs(mv) < abs(kv) - 1e-12:
                failures.append(("kappa/mcc", k))
        h = macro_recall(m, -1).value
        g = macro_recall(m, 0).value
        if not (h <= g + 1e-12 and g <= mac_r + 1e-12):
            failures.append(("power means", k))
    elapsed = time.perf_counter() - t0
    ok = worst["micro"] <= 1e-12 and max(worst["acc~"], worst["kappa~"], worst["wf1~"]) <= 1e-9 and not failures and elapsed < 10
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(4, ok, f"max errors {detail}; {len(failures)} order violations; {elapsed:.2f} s")


def test_criterion_5_chance_correction(report):
    rng = np.random.default_rng(77)
    worst = 0.0
    f1_excess = -np.inf
    f1_equality = {}
    t0 = time.perf_counter()
    for n in (2, 3, 4, 5):
        f1_equality[n] = 0.0
        for k in range(500):
            p = rng.dirichlet(np.ones(n)) + 1e-3
            p /= p.sum()
            if k % 2:
                z = p
            else:
                z = rng.dirichlet(np.ones(n)) + 1e-3
                z /= z.sum()
            m = chance_matrix(ChanceModel(tuple(z), tuple(p), float(rng.integers(1, 1000))))
            for value, target in (
                (macro_recall(m).value, 1 / n),
                (macro_precision(m).value, 1 / n),
                (kappa(m).value, 0.0),
                (mcc(m).value, 0.0),
            ):
                worst = max(worst, abs(value - target))
            f1 = macro_f1(m).value
            f1_excess = max(f1_excess, f1 - 1 / n)
            if z is p:
                f1_equality[n] = max(f1_equality[n], abs(f1 - 1 / n))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and f1_excess <= 1e-9 and max(f1_equality.values()) <= 1e-9 and elapsed < 10
    report(
        5,
        ok,
        f"max |error| {worst:.1e}; macF1 - 1/n <= {f1_excess:.1e}; "
        f"at z = p |macF1 - 1/n| <= {max(f1_equality.values()):.1e}; {elapsed:.2f} s",
    )


GRADIENT_METRICS = [m for m in DEFAULT_ROSTER] + [parse_metric("class_recall:0")]


def test_criterion_6_gradients(report):
    rng = np.random.default_rng(606)
    worst = 0.0
    worst_metric = None
    t0 = time.perf_counter()
    for metric in GRADIENT_METRICS:
        for _ in range(100):
            n = int(rng.integers(2, 6))
            cells = rng.integers(1, 50, size=(n, n)).astype(np.float64)
            a = analytic_gradient(metric, cells)
            b = numeric_gradient(metric, cells)
            err = np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12)
            if err > worst:
                worst, worst_metric = err, metric.name
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 30
    report(6, ok, f"{len(GRADIENT_METRICS)} metrics x 100 matrices, max relative error {worst:.1e} ({worst_metric}); {elapsed:.2f} s")


MONOTONICITY_FAILURES = {"weighted_f1", "kappa", "mcc"}
PREVALENCE_FAILURES = {"accuracy", "macro_precision", "macro_f1", "macro_f1_prime", "weighted_f1", "kappa", "mcc"}


def test_criterion_7_property_table(report, capsys):
    t0 = time.perf_counter()
    code = main(["check", "--format", "json"])
    elapsed = time.perf_counter() - t0
    data = json.loads(capsys.readouterr().out)
    rows = {r["metric"]: r for r in data["rows"]}
    problems = list(data["contradictions"])
    assert data["budget"]["trials"] == 10_000
    for name, row in rows.items():
        mono = row["properties"]["monotonicity"]
        prev = row["properties"]["prevalence_invariance"]
        if (mono["verdict"] == "refuted") != (name in MONOTONICITY_FAILURES):
            problems.append(f"{name} monotonicity {mono['verdict']}")
        if name in MONOTONICITY_FAILURES and mono["witness"] is None:
            problems.append(f"{name} monotonicity without witness")
        if (prev["verdict"] == "refuted") != (name in PREVALENCE_FAILURES):
            problems.append(f"{name} prevalence invariance {prev['verdict']}")
        if name in PREVALENCE_FAILURES:
            if prev["witness"] is None:
                problems.append(f"{name} prevalence invariance without witness")
            if row["calibrated"]["prevalence_invariance"]["verdict"] != "holds_on_sample":
                problems.append(f"{name}~ prevalence invariance not restored")
    ok = code == EXIT_OK and not problems and elapsed < 120
    report(7, ok, f"{len(rows)} metrics, exit {code}, {len(problems)} contradictions {problems[:3]}; {elapsed:.1f} s")


def test_criterion_8_ranking_equivalences(report):
    rng = np.random.default_rng(8)
    rhos = []
    for n, systems in ((2, 5), (3, 12), (4, 20), (5, 40)):
        runs = [SystemRun(f"s{k}", _random_matrix(rng, n)) for k in range(systems)]
        table = score_systems(runs, ["macro_recall", "kappa~", "accuracy~", "weighted_f1~", "macro_f1~"])
        corr = correlation_matrix(table)
        rhos += [
            corr.get("macro_recall", "kappa~"),
            corr.get("macro_recall", "accuracy~"),
            corr.get("weighted_f1~", "macro_f1~"),
        ]
    ok = all(r == 1.0 for r in rhos)
    report(8, ok, f"{len(rhos)} column pairs on 4 fixtures, rho values {sorted(set(rhos))}")
