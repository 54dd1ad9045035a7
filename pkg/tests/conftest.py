import math

import pytest
from hypothesis import HealthCheck, settings

from qsaw.params import derive_params

settings.register_profile(
    "qsaw", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("qsaw")

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture
def fig1_params():
    """n=6, K=sqrt2, k=sqrt3 on the cylinder."""
    return derive_params(K="sqrt2", k="sqrt3", n=6, boundary="cylinder")


@pytest.fixture
def torus_params():
    return derive_params(K=math.sqrt(2), n=5, L=3)
