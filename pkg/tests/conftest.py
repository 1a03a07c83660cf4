import warnings

import numpy as np
import pytest

from pfc_imex import spectral
from pfc_imex.tableau import load_tableau


@pytest.fixture(scope="session")
def imex43():
    return load_tableau("imex43")


@pytest.fixture(scope="session")
def euler1():
    return load_tableau("euler1")


@pytest.fixture
def grid32():
    return spectral.make_grid((32, 32), (32.0, 32.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20241014)


@pytest.fixture(autouse=True)
def _quiet_certification_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="stabilizers .* are not certified")
        yield


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
