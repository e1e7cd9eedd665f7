import numpy as np
import pytest

from omnisr.testimages import cartoon_panorama


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_panorama():
    """A 64x128 piecewise-smooth test sphere, values inset from [0, 1]."""
    return cartoon_panorama(64, 128, seed=5)


@pytest.fixture(scope="session")
def medium_panorama():
    return cartoon_panorama(128, 256, seed=11)
