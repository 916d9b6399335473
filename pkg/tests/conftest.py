import sys
from pathlib import Path

import pytest

SRC_DIR = Path(__file__).resolve().parents[1] / "src"
if str(SRC_DIR) not in sys.path:
    sys.path.insert(0, str(SRC_DIR))

from reconfig_sim.reference_scenarios import (  # noqa: E402
    SURVEILLANCE,
    SURVEILLANCE_OSCILLATING,
    TOY6,
    VIDEOCONF,
    generate_reference_scenario,
)


@pytest.fixture(scope="session")
def toy6():
    return generate_reference_scenario(TOY6)


@pytest.fixture(scope="session")
def surveillance():
    return generate_reference_scenario(SURVEILLANCE)


@pytest.fixture(scope="session")
def oscillating():
    return generate_reference_scenario(SURVEILLANCE_OSCILLATING)


@pytest.fixture(scope="session")
def videoconf():
    return generate_reference_scenario(VIDEOCONF)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: scaling runs over the large fixtures")
