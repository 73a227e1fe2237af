import math

import pytest
from hypothesis import settings

from nhsense import ChainSpec, DriveSpec

settings.register_profile("repro", derandomize=True)
settings.load_profile("repro")

# lines collected by test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture
def fig4_chain():
    return ChainSpec(6, 0.5, 0.3, 0.7, 0.4, kappa=0.05)


@pytest.fixture
def fig5_chain():
    return ChainSpec(4, 1.0, 1.0, 1.5, 2.5, kappa=0.05)


@pytest.fixture
def fig6_chain():
    return ChainSpec(10, 0.6, 0.4, 1.1, 1.6, kappa=0.05, m=2)


@pytest.fixture
def drive_pi2():
    return DriveSpec(beta_abs=1.0, theta=math.pi / 2, phi_meas=0.0, tau=100.0)


@pytest.fixture
def drive_pi4():
    return DriveSpec(beta_abs=1.0, theta=math.pi / 4, phi_meas=0.0, tau=100.0)
