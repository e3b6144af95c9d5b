import warnings

import numpy as np
import pytest

warnings.filterwarnings("ignore", message="The TBB threading layer", category=Warning)

from ahxray.grid import PolarGrid  # noqa: E402
from ahxray.metric import AHMetric  # noqa: E402


@pytest.fixture(scope="session")
def hyp():
    return AHMetric.hyperbolic()


@pytest.fixture(scope="session")
def bumped():
    return AHMetric.single_bump()


@pytest.fixture(scope="session")
def small_grid():
    return PolarGrid(64, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_disk_points(rng, count, r_max=0.95):
    r = r_max * np.sqrt(rng.uniform(size=count))
    return r * np.exp(2j * np.pi * rng.uniform(size=count))
