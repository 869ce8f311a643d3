import numpy as np
import pytest

from helpers import solved
from pdegnep.mesh_fem import build_crossed_mesh


@pytest.fixture(scope="session")
def mesh8():
    return build_crossed_mesh(8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def run16():
    return solved(16)


@pytest.fixture(scope="session")
def run16_coop():
    return solved(16, mode="coop")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[key])
