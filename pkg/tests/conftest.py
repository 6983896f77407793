import math
import sys

import pytest
from hypothesis import HealthCheck, settings

from reflectdiff.controlled import BoundaryBehavior, DiffusionCoefficients
from reflectdiff.fixtures import DOMAINS

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def lens():
    return DOMAINS["lens"]()


@pytest.fixture(scope="session")
def cusp():
    return DOMAINS["cusp"]()


@pytest.fixture(scope="session")
def half_line():
    return DOMAINS["half_line"]()


@pytest.fixture(scope="session")
def box():
    return DOMAINS["unit_box"]()


def brownian(dim, scale=1.0):
    return DiffusionCoefficients.builtin("brownian", dim, scale=scale)


def reflect(dt, ratio=0.1):
    return BoundaryBehavior.reflect(ratio * math.sqrt(dt))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
