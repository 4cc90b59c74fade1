import sys

import numpy as np
import pytest

from ibmdiff.geometry import CircleBoundary, GridSpec, classify_nodes
from ibmdiff.metrics import TABLE1, Study

UM = 1e-6


@pytest.fixture(scope="session")
def hole():
    return CircleBoundary((0.0, 0.0), 0.5 * UM)


@pytest.fixture(scope="session")
def grid100(hole):
    return GridSpec.around(hole, 100, 0.01 * UM)


@pytest.fixture(scope="session")
def cls100(grid100, hole):
    return classify_nodes(grid100, hole)


@pytest.fixture(scope="session")
def study100():
    return Study(TABLE1[100])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
