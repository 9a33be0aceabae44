import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mzk.grid import GridSpec

settings.register_profile("mzk", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("mzk")


@pytest.fixture
def unit_box():
    """8x8 grid on a 2pi box: integer wavenumbers."""
    return GridSpec(8, 8, 2 * math.pi, 2 * math.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
