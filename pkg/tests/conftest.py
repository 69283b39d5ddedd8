import numpy as np
import pytest

from gaplab.cross_section import make_params
from gaplab.geometry import build_metric, builtin_profile
from gaplab.spectral2d import (Grid2D, assemble_delta, assemble_delta0, guess_eigenfunction, sample_warp,
                               solve_eigen)
from gaplab.sturm_liouville import assemble_model_ode, solve_model_ode

T0 = 1.0
N_Y = 60


class Setup:
    """Metric, parameters and reference-resolution operators at one epsilon."""

    def __init__(self, name: str, eps: float, k_max: int = 3):
        self.profile = builtin_profile(name)
        self.metric = build_metric(self.profile, T0, eps, n_s=2 * N_Y + 1)
        self.params = make_params(self.metric, T0, eps)
        self.grid = Grid2D.reference(self.params.x_max, n_y_intervals=N_Y)
        self.samples = sample_warp(self.metric, self.params, self.grid)
        self.op0 = assemble_delta0(self.metric, self.params, self.grid, self.samples)
        self.op = assemble_delta(self.metric, self.params, self.grid, self.samples)
        self.model = solve_model_ode(assemble_model_ode(self.metric, self.params, self.grid.x), k_max)
        self.guesses = [guess_eigenfunction(k, self.model, self.grid, self.op0) for k in range(1, k_max + 1)]
        self.spec0 = solve_eigen(self.op0, k_max, self.guesses)
        self.spec = solve_eigen(self.op, k_max, self.guesses)


@pytest.fixture(scope="session")
def g1_setup():
    return Setup("G1", 0.05)


@pytest.fixture(scope="session")
def g3_setup():
    return Setup("G3", 0.05)


@pytest.fixture(scope="session")
def g1_metric():
    return build_metric(builtin_profile("G1"), T0, 0.05, n_s=2 * N_Y + 1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one verdict line per acceptance criterion, shown in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> str:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
