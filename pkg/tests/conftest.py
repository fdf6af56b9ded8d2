import numpy as np
import pytest

from mracflyer.config import builtin_config
from mracflyer.controller import Constant, GainSet
from mracflyer.rbf import build_grid_network

M = 95e-6
G = 9.81
R_D = np.array([0.0, 0.0, 0.1])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def gains():
    return GainSet.from_poles(M, G, 5e-6)


@pytest.fixture(scope="session")
def net():
    lo = np.r_[R_D - 0.2, [-0.5] * 3]
    hi = np.r_[R_D + 0.2, [0.5] * 3]
    return build_grid_network(lo, hi, [3, 3, 3, 1, 1, 1], 1.0)


@pytest.fixture(scope="session")
def hover_ref():
    return Constant(R_D)


@pytest.fixture(scope="session")
def paper_cfg():
    return builtin_config("paper_hover")


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
