from pathlib import Path

import pytest

from sonovortex.acoustic import TransducerArray
from sonovortex.geometry import Point3
from sonovortex.psychophysics import ultrasound_force_profile

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def default_array() -> TransducerArray:
    return TransducerArray.centered()


@pytest.fixture(scope="session")
def working_focus() -> Point3:
    return Point3(0.0, 0.0, 0.15)


@pytest.fixture(scope="session")
def us_profile(default_array, working_focus):
    # field simulation is the slow part; share one profile across tests
    return ultrasound_force_profile(default_array, working_focus)
