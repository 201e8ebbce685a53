import sys

import numpy as np
import pytest

from tbilab.squid import FluxDynamics, SquidParams, eigensolve
from tbilab.two_level import RabiParams, SpinDynamics


@pytest.fixture(scope="session")
def unit_rabi():
    return RabiParams(1.0)


@pytest.fixture(scope="session")
def spin():
    return SpinDynamics(RabiParams(1.0))


@pytest.fixture(scope="session")
def frozen():
    return SpinDynamics(RabiParams(0.0))


@pytest.fixture(scope="session")
def reference_params():
    return SquidParams.reference()


@pytest.fixture(scope="session")
def reference_basis(reference_params):
    return eigensolve(reference_params)


@pytest.fixture(scope="session")
def reference_flux(reference_basis):
    return FluxDynamics(reference_basis)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
