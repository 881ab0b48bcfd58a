import math

import pytest
from hypothesis import HealthCheck, settings

from hdqkd.source import SourceParams, derive_moments, nominal_tfcm

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

JITTER = 30e-12

# Acceptance results, printed in the terminal summary whatever the capture mode.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def moments16():
    return derive_moments(SourceParams(16 * JITTER, 200e9, 0.01))


@pytest.fixture(scope="session")
def gamma16(moments16):
    return nominal_tfcm(moments16)


@pytest.fixture(scope="session")
def moments1024():
    return derive_moments(SourceParams(1024 * math.sqrt(2) * JITTER, 200e9))
