import numpy as np
import pytest

from bedsense import ControlGrid
from bedsense.models import AcFieldModel, NuclearSpinModel, NuclearSpinParams

ACCEPTANCE_LINES: list[str] = []


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the long-running tier")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="long-running; use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def nuclear_model():
    return NuclearSpinModel()


@pytest.fixture(scope="session")
def ac_model():
    return AcFieldModel()


@pytest.fixture(scope="session")
def nuclear_grid():
    return ControlGrid.arange(1.0, 10.0, 0.01)


@pytest.fixture(scope="session")
def ac_grid():
    return ControlGrid.arange(0.51, 7.0, 0.01)


@pytest.fixture(scope="session")
def fig1_truth_row():
    return NuclearSpinParams.from_khz_deg([47.0, 83.8], [30.0, 21.0]).as_row()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
