import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_CRITERIA: dict[int, str] = {}


@pytest.fixture(scope="session")
def criterion_report():
    """``report(k, ok, detail)`` records one acceptance line for the terminal summary."""

    def report(k, ok, detail=""):
        line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _CRITERIA[k] = line
        print(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
