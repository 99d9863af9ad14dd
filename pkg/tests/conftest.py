import numpy as np
import pytest

from mfclab import SimConfig, build_advertising, build_vintage


@pytest.fixture(scope="session")
def delay_model():
    return build_advertising()


@pytest.fixture(scope="session")
def vintage_model():
    return build_vintage()


@pytest.fixture()
def small_cfg():
    # deliberately small: unit tests probe structure, not statistics
    return SimConfig(t0=0.0, horizon=1.0, steps=20, paths=50, seed=11)


@pytest.fixture()
def rng():
    return np.random.default_rng(2024)
