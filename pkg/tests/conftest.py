import pytest

from palmgrip.core import FingerType, GripperConfig, builtin_objects
from palmgrip.fingers import default_calibrations, load_curve_set
from palmgrip.rig import Rig
from palmgrip.world import World, load_rules


@pytest.fixture(scope="session")
def cfg():
    return GripperConfig()


@pytest.fixture(scope="session")
def rig():
    return Rig.default()


@pytest.fixture(scope="session")
def curve_set():
    return load_curve_set()


@pytest.fixture(scope="session")
def calibrations(curve_set):
    return default_calibrations(curve_set)


@pytest.fixture(scope="session")
def rules():
    return load_rules()


@pytest.fixture(scope="session")
def objects():
    return {obj.name: obj for obj in builtin_objects()}


@pytest.fixture(scope="session")
def det_world(rules, rig):
    return World(rules, rig, deterministic=True)


@pytest.fixture(scope="session")
def stoch_world(rules, rig):
    return World(rules, rig, deterministic=False)
