import math

import pytest

from rwg.constants import FemOptions, TunnelingConstants, compute_constants
from rwg.geometry import WaveguideGeometry


@pytest.fixture(scope="session")
def default_geom():
    return WaveguideGeometry()


@pytest.fixture(scope="session")
def default_constants(default_geom) -> TunnelingConstants:
    return compute_constants(default_geom, FemOptions())


@pytest.fixture(scope="session")
def toy_constants() -> TunnelingConstants:
    """Round-number constants for formula checks."""
    return TunnelingConstants(k0_sq=20.0, b1=1.5, q=1, A_abs=0.9, a_bold=1.8j, alpha=0.8, beta=0.4,
                              P=1.0 / (2 * 2.25 * 0.16 * 0.81), omega=math.pi / 2)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
