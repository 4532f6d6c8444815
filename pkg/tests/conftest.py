import logging

import numpy as np
import pytest

from balweights.data import Dataset
from balweights.simulation import generate, rep_rng


@pytest.fixture(autouse=True)
def _quiet_solver_warnings():
    logging.getLogger("balweights").setLevel(logging.ERROR)
    yield


@pytest.fixture
def tiny():
    """n=4 dataset with one covariate and an outcome."""
    return Dataset(
        covariates=[[-1.0], [0.0], [1.0], [2.0]],
        treatment=[1, 0, 1, 0],
        outcome=[3.0, 1.0, 5.0, 1.0],
        covariate_names=("x1",),
    )


@pytest.fixture
def dgp1_draw():
    return generate("1", 1000, 20.0, rep_rng(123, 0))


def simulated(dgp, param, n=1000, seed=0, reps=1):
    return [generate(dgp, n, param, rep_rng(seed, r)) for r in range(reps)]


def grid_simplex(resolution, m):
    """All points of the (m-1)-simplex on a lattice with the given spacing."""
    steps = int(round(1.0 / resolution))
    if m == 1:
        return np.ones((1, 1))
    if m == 2:
        a = np.arange(steps + 1) / steps
        return np.column_stack([a, 1.0 - a])
    i, j = np.meshgrid(np.arange(steps + 1), np.arange(steps + 1), indexing="ij")
    keep = i + j <= steps
    a, b = i[keep] / steps, j[keep] / steps
    return np.column_stack([a, b, 1.0 - a - b])


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
