import numpy as np
import pytest

from scatsep.scenario import Scenario


@pytest.fixture(scope="session")
def scenario():
    return Scenario()


@pytest.fixture(scope="session")
def mics(scenario):
    return scenario.microphones()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240615)
