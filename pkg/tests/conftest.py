import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from clfeval.matrix import ConfusionMatrix, LabelSpace

settings.register_profile(
    "default",
    deadline=None,
    max_examples=100,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# running example: class x occurs 25 times, class y 15 times
TWO_CLASS = [[15, 5], [10, 10]]
# the same matrix with column y doubled
TWO_CLASS_SCALED = [[15, 10], [10, 20]]
# kappa and mcc are zero here; 10 more errors at (pred 2, gold 1) raise both
ZERO_AGREEMENT = [[10, 43, 0], [1, 1, 0], [0, 0, 1]]
ZERO_AGREEMENT_PLUS_ERRORS = [[10, 43, 0], [1, 1, 0], [0, 10, 1]]


@st.composite
def matrices(draw, min_n=2, max_n=6, max_mass=100, positive_prevalence=False, positive_bias=False, min_cell=0):
    """Integer confusion matrices as float arrays."""
    n = draw(st.integers(min_n, max_n))
    cells = np.array(
        draw(st.lists(st.integers(min_cell, max_mass), min_size=n * n, max_size=n * n)), dtype=np.float64
    ).reshape(n, n)
    if positive_prevalence:
        for j in np.flatnonzero(cells.sum(axis=0) == 0):
            cells[j, j] = 1.0
    if positive_bias:
        for i in np.flatnonzero(cells.sum(axis=1) == 0):
            cells[i, i] = 1.0
    if cells.sum() == 0:
        cells[0, 0] = 1.0
    return cells


def random_matrices(count, n_range=(2, 6), mass=100, seed=0, low=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        out.append(rng.integers(low, mass + 1, size=(n, n)).astype(np.float64))
    return out


def as_cm(cells, labels=None):
    cells = np.asarray(cells, dtype=np.float64)
    labels = LabelSpace.default(cells.shape[0]) if labels is None else LabelSpace(tuple(labels))
    return ConfusionMatrix(labels, cells)


@pytest.fixture
def two_class():
    return ConfusionMatrix.from_array(TWO_CLASS, ["x", "y"])
