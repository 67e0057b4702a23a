import numpy as np
import pytest
from hypothesis import given

from clfeval.exceptions import ClfEvalError, DomainError, UnsupportedMetricError
from clfeval.gradients import analytic_gradient, gradient_supported, numeric_gradient
from clfeval.metrics import DEFAULT_ROSTER, metric_value, parse_metric

from conftest import ZERO_AGREEMENT, TWO_CLASS, matrices, random_matrices

GRADIENT_METRICS = list(DEFAULT_ROSTER) + [parse_metric("macro_recall:p=2"), parse_metric("class_recall:1")]


def _rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12)


class TestExamples:
    def test_accuracy_closed_form(self):
        m = np.array(TWO_CLASS, dtype=float)
        acc, s = 25 / 40, 40
        grad = analytic_gradient("accuracy", m)
        expected = np.full((2, 2), -acc / s)
        np.fill_diagonal(expected, (1 - acc) / s)
        np.testing.assert_allclose(grad, expected, rtol=1e-15)

    def test_macro_recall_error_cell(self):
        # error predicted as x for an item of class y
        grad = analytic_gradient("macro_recall:p=1", TWO_CLASS)
        assert grad[0, 1] == pytest.approx(-(2 / 3) / 30, rel=1e-14)

    def test_accuracy_matches_numeric(self):
        grad = numeric_gradient("accuracy", TWO_CLASS, step=1e-5)
        np.testing.assert_allclose(grad, analytic_gradient("accuracy", TWO_CLASS), rtol=1e-8, atol=1e-12)

    def test_constant_metric_has_zero_gradient(self):
        assert np.array_equal(numeric_gradient(lambda m: 0.0, TWO_CLASS), np.zeros((2, 2)))

    @pytest.mark.parametrize("metric", ["kappa", "mcc"])
    def test_error_raises_agreement_on_zero_agreement_matrix(self, metric):
        assert numeric_gradient(metric, ZERO_AGREEMENT)[2, 1] > 0
        assert analytic_gradient(metric, ZERO_AGREEMENT)[2, 1] > 0


class TestAgainstFiniteDifferences:
    @pytest.mark.parametrize("metric", GRADIENT_METRICS, ids=lambda m: m.name)
    def test_random_interior(self, metric):
        for cells in random_matrices(20, seed=11, low=1):
            a = analytic_gradient(metric, cells)
            b = numeric_gradient(metric, cells)
            assert _rel_err(a, b) <= 1e-6

    @given(matrices(max_n=4, min_cell=1, max_mass=50))
    def test_macro_f1_prime(self, cells):
        assert _rel_err(analytic_gradient("macro_f1_prime", cells), numeric_gradient("macro_f1_prime", cells)) <= 1e-6

    @given(matrices(max_n=4, min_cell=1, max_mass=50))
    def test_weighted_f1(self, cells):
        assert _rel_err(analytic_gradient("weighted_f1", cells), numeric_gradient("weighted_f1", cells)) <= 1e-6

    def test_zero_cell_uses_forward_difference(self):
        cells = np.array([[5.0, 0.0], [2.0, 7.0]])
        grad = numeric_gradient("macro_f1", cells)
        np.testing.assert_allclose(grad, analytic_gradient("macro_f1", cells), rtol=1e-5)


class TestSignPatterns:
    @pytest.mark.parametrize("metric", ["accuracy", "macro_recall:p=1", "macro_recall:p=0", "macro_precision", "macro_f1"])
    @given(cells=matrices(max_n=5, min_cell=1))
    def test_monotone_metrics(self, metric, cells):
        grad = analytic_gradient(metric, cells)
        eye = np.eye(len(cells), dtype=bool)
        assert np.all(grad[eye] >= -1e-15)
        assert np.all(grad[~eye] <= 1e-15)


class TestErrors:
    def test_calibrated_unsupported(self):
        assert not gradient_supported("kappa~")
        with pytest.raises(UnsupportedMetricError):
            analytic_gradient("kappa~", TWO_CLASS)

    @pytest.mark.parametrize(
        "metric, cells",
        [
            ("macro_recall:p=1", [[1, 0], [1, 0]]),
            ("macro_recall:p=0", [[0, 0], [1, 2]]),
            ("macro_precision", [[1, 1], [0, 0]]),
            ("kappa", [[2, 0], [0, 0]]),
            ("mcc", [[1, 1], [0, 0]]),
            ("accuracy", [[0, 0], [0, 0]]),
        ],
    )
    def test_boundary(self, metric, cells):
        with pytest.raises(DomainError):
            analytic_gradient(metric, cells)

    def test_non_positive_step(self):
        with pytest.raises(ClfEvalError):
            numeric_gradient("accuracy", TWO_CLASS, step=0)

    def test_perturbation_leaves_domain(self):
        with pytest.raises(DomainError):
            numeric_gradient("kappa", [[2, 0], [0, 0]])

    def test_numeric_uses_metric_definition(self):
        cells = np.array(TWO_CLASS, dtype=float)
        grad = numeric_gradient("kappa", cells, step=1e-3)
        bumped = cells.copy()
        bumped[1, 0] += 1e-3
        down = cells.copy()
        down[1, 0] -= 1e-3
        assert grad[1, 0] == (metric_value("kappa", bumped) - metric_value("kappa", down)) / 2e-3
