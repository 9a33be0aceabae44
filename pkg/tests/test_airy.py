import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mzk.airy import SERIES_MAX_NEG, SERIES_MAX_POS, airy_ai, airy_ai_quadrature

AI0 = 0.355028053887817239260063186004


def mp_ai(z):
    return float(mpmath.airyai(z))


def test_value_at_zero():
    assert airy_ai(0.0) == pytest.approx(AI0, abs=1e-15)
    assert airy_ai_quadrature(0.0) == pytest.approx(0.3550280539, abs=1e-9)
    assert airy_ai_quadrature(0.0) == pytest.approx(AI0, abs=1e-13)


def test_matches_mpmath_on_wide_range():
    z = np.concatenate([np.linspace(-50, 50, 2001), [-SERIES_MAX_NEG, SERIES_MAX_POS]])
    ref = np.array([mp_ai(v) for v in z])
    assert np.max(np.abs(airy_ai(z) - ref)) <= 1e-10


@pytest.mark.parametrize("side", [-1, 1])
def test_continuous_across_switchover(side):
    edge = SERIES_MAX_POS if side > 0 else -SERIES_MAX_NEG
    z = edge + np.array([-1e-9, 1e-9])
    a = airy_ai(z)
    for zi, ai in zip(z, a):
        assert ai == pytest.approx(mp_ai(zi), abs=1e-11)


@pytest.mark.parametrize("x", [-6.0, -2.5, -1.0, 0.7, 3.0, 5.5])
def test_quadrature_oracle(x):
    assert airy_ai_quadrature(x) == pytest.approx(mp_ai(x), abs=1e-11)


def test_array_shape_and_scalar():
    z = np.zeros((3, 4))
    assert airy_ai(z).shape == (3, 4)
    assert isinstance(airy_ai(1.0), float)
    with pytest.raises(ValueError):
        airy_ai(math.nan)


def test_far_tail_is_tiny_and_positive():
    assert 0 < airy_ai(60.0) < 1e-60


def test_decay_envelope_stable_under_refinement():
    def sup(dx):
        x = np.arange(-200.0, -1.0, dx)
        return float(np.max(np.abs(airy_ai(x)) * np.abs(x) ** 0.25))

    coarse, fine = sup(0.01), sup(0.0025)
    assert math.isfinite(fine)
    assert fine == pytest.approx(coarse, rel=1e-4)
    assert fine < 1 / math.sqrt(math.pi) + 1e-3


@given(st.floats(-40.0, 40.0))
def test_property_airy_equation(z):
    # Ai'' = z Ai, checked by a centred difference
    h = 1e-3
    d2 = (airy_ai(z + h) - 2 * airy_ai(z) + airy_ai(z - h)) / h**2
    assert d2 == pytest.approx(z * airy_ai(z), abs=1e-6 * (1 + abs(z)))
