import numpy as np
import pytest

from hlslab import PowerPair, ShotOptions, integrate_shot, lane_emden, scalar_power, simplex_search
from hlslab.shooting import SearchOptions

# exact bubble for n=3, p=5 needs a long horizon before the decay test fires
BUBBLE_OPTS = ShotOptions(r_max=1e9)


def bubble_exact(r):
    return (1.0 + r * r / 3.0) ** -0.5


@pytest.fixture(scope="session")
def bubble_spec():
    return scalar_power(3, 5.0)


@pytest.fixture(scope="session")
def bubble_shot(bubble_spec):
    return integrate_shot(bubble_spec, [1.0], BUBBLE_OPTS)


@pytest.fixture(scope="session")
def le322():
    return lane_emden(3, PowerPair(2.0, 2.0))


@pytest.fixture(scope="session")
def sub_shot(le322):
    # r0 ~ 6.24, so R in {1, 2, 5} lies inside [0, r0)
    return integrate_shot(le322, [0.08, 0.12])


@pytest.fixture(scope="session")
def le533():
    return lane_emden(5, PowerPair(3.0, 3.0))


@pytest.fixture(scope="session")
def sym533(le533):
    return integrate_shot(le533, [1.0, 1.0])


@pytest.fixture(scope="session")
def le525():
    """(n, p, q) = (5, 2, 5): supercritical, asymmetric decay rates."""
    return lane_emden(5, PowerPair(2.0, 5.0))


@pytest.fixture(scope="session")
def gs525(le525):
    return simplex_search(le525, 2.0, ShotOptions(), SearchOptions())


@pytest.fixture(scope="session")
def le552():
    """(n, p, q) = (5, 5, 2): the p >= q orientation of the same pair."""
    return lane_emden(5, PowerPair(5.0, 2.0))


@pytest.fixture(scope="session")
def gs552(le552):
    return simplex_search(le552, 2.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240601)
