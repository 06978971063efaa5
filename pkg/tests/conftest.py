import numpy as np
import pytest

from pointerlab import Grid, ModelParams, default_grid, fiducial_alpha, make_pointer_state


@pytest.fixture
def params():
    return ModelParams(m=1.0, D=1.0)


@pytest.fixture
def grid():
    return default_grid(n_points=256, widths=20)


@pytest.fixture
def small_grid():
    # 128 points over 12 length units: ~9 points per fiducial width
    return Grid(128, 12.0)


@pytest.fixture
def psi0(grid):
    return make_pointer_state(grid, fiducial_alpha(1.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance report ------------------------------------------------------------

ACCEPTANCE_LINES = []


def pytest_runtest_logreport(report):
    if report.when == "call":
        ACCEPTANCE_LINES.extend(v for k, v in report.user_properties if k == "acceptance")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
