import numpy as np
import pytest

from mfsr.scenarios import default_scenario, recovery_scenario


@pytest.fixture(scope="session")
def recovery_data():
    return recovery_scenario()


@pytest.fixture(scope="session")
def noisy_data():
    return default_scenario()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
