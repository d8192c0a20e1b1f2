import numpy as np
import pytest

from sixdma.channel import wavelength
from sixdma.geometry import LocalArray, MovementConstraints, SiteSpace
from sixdma.scenario import SensingRegion, SensingScenario

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])


@pytest.fixture(scope="session")
def lam():
    return wavelength(2.4e9)


@pytest.fixture(scope="session")
def site():
    return SiteSpace(0.6)


@pytest.fixture(scope="session")
def cons(lam):
    return MovementConstraints((np.sqrt(2) / 2 + 0.5) * lam)


@pytest.fixture(scope="session")
def pair(lam):
    return LocalArray.ula(2, lam / 2)


@pytest.fixture(scope="session")
def small_scenario(lam):
    """Three regions with 1, 2 and 3 cells; cheap enough for optimizer tests."""
    regions = [SensingRegion.at_bearing(d, np.deg2rad(b), r, k)
               for d, b, r, k in [(20, 0, 2.0, 1), (40, 120, 2.0 * np.sqrt(2), 2),
                                  (60, 240, 2.0 * np.sqrt(3), 3)]]
    return SensingScenario.from_regions(regions, noise_var=1e-12, power=1.0, snapshots=64, lam=lam)
