import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from echelon.scenario import builtin_scenario

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def simple():
    return builtin_scenario("simple")


@pytest.fixture(scope="session")
def moderate():
    return builtin_scenario("moderate")


@pytest.fixture(scope="session")
def complex_sc():
    return builtin_scenario("complex")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
