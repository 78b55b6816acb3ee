import sys

import numpy as np
import pytest
from hypothesis import settings

from pmorkit.solver import Scenario, run_fom

settings.register_profile("pmorkit", deadline=None, max_examples=40)
settings.load_profile("pmorkit")


@pytest.fixture(scope="session")
def scenario():
    return Scenario()


@pytest.fixture(scope="session")
def default_fom(scenario):
    """Default full-order run, shared by every test that only reads it."""
    return run_fom(scenario)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
