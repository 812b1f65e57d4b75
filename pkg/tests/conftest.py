import math
from pathlib import Path

import numpy as np
import pytest

from aerial_ndt.scenario import default_scenario, load_scenario, noiseless
from aerial_ndt.scheduler import run

DATA = Path(__file__).resolve().parents[1] / "src" / "aerial_ndt" / "data"
NOMINAL = DATA / "nominal.toml"
BASELINE = DATA / "baseline_flight1.csv"


@pytest.fixture(scope="session")
def nominal_path():
    return NOMINAL


@pytest.fixture(scope="session")
def nominal_log():
    return run(load_scenario(NOMINAL))


@pytest.fixture(scope="session")
def noiseless_log():
    return run(noiseless(default_scenario()))


def yaw_quat(yaw):
    return np.array([math.cos(yaw / 2), 0.0, 0.0, math.sin(yaw / 2)])
