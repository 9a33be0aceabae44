import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from mzk.grid import Field, Frame, GridSpec, InitialCondition, SpectralField, forward, inverse, make_grid
from mzk.linear import (
    KernelSample,
    ProfileSnapshot,
    SpectralKernelGrid,
    airy_kernel_closed,
    airy_kernel_spectral,
    envelope_check,
    kernel_grid,
    kernel_samples_2d,
    kernel_weak_lp_scaling,
    profile_of,
    profile_to_state_coeffs,
    propagate_linear,
    weak_lp_norm,
)
from mzk.solver import RunConfig, simulate

SPEC = GridSpec(32, 16, 11.0, 7.0)


@pytest.fixture
def sf(rng):
    return forward(Field(SPEC, rng.standard_normal(SPEC.shape), time=2.0))


def test_propagate_zero_is_identity(sf):
    out = propagate_linear(sf, 0.0)
    np.testing.assert_array_equal(out.coeffs, sf.coeffs)
    assert out.time == sf.time


def test_propagate_group_inverse_and_norm(sf):
    fwd = propagate_linear(sf, 3.3)
    assert fwd.time == pytest.approx(5.3)
    assert fwd.l2_norm() == pytest.approx(sf.l2_norm(), rel=1e-12)
    back = propagate_linear(fwd, -3.3)
    assert np.max(np.abs(back.coeffs - sf.coeffs)) <= 1e-12 * np.max(np.abs(sf.coeffs))


@given(st.floats(-20, 20), st.floats(-20, 20))
def test_property_propagate_composes(s, t):
    rng = np.random.default_rng(0)
    sf = forward(Field(SPEC, rng.standard_normal(SPEC.shape)))
    a = propagate_linear(propagate_linear(sf, s), t)
    b = propagate_linear(sf, s + t)
    assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-10 * np.max(np.abs(sf.coeffs))
    inverse(a, imag_tol=1e-10)


def test_propagate_solves_linear_equation():
    # v = cos(x_a) evolves to cos(x_a + t) under v_t + v_aaa + v_bbb = 0
    spec = GridSpec(16, 8, 2 * math.pi, 2 * math.pi)
    xa, _ = make_grid(spec).mesh()
    out = inverse(propagate_linear(forward(Field(spec, np.cos(xa))), 0.7))
    np.testing.assert_allclose(out.values, np.cos(xa + 0.7), atol=1e-13)


def test_profile_at_time_zero_is_state(rng):
    f = Field(SPEC, rng.standard_normal(SPEC.shape), time=0.0)
    np.testing.assert_allclose(profile_of(f).coeffs, forward(f).coeffs, atol=0)


def test_profile_round_trip(sf):
    fld = inverse(sf)
    prof = profile_of(fld)
    np.testing.assert_allclose(profile_to_state_coeffs(prof), sf.coeffs, atol=1e-15)


def test_profile_requires_ab_frame():
    with pytest.raises(ValueError):
        profile_of(Field(SPEC, np.zeros(SPEC.shape), frame=Frame.XY))


def test_profile_snapshot_validation():
    with pytest.raises(ValueError):
        ProfileSnapshot(SPEC, 1.0, np.zeros((4, 4)))
    bad = np.zeros(SPEC.shape, complex)
    bad[1, 1] = np.inf
    with pytest.raises(ValueError):
        ProfileSnapshot(SPEC, 1.0, bad)


def _profile_drift(traj):
    f0 = traj[0].profile
    drift = max(SpectralField(f0.grid, p.profile.coeffs - f0.coeffs).l2_norm() for p in traj)
    return drift / f0.as_spectral().l2_norm()


BOX = GridSpec(64, 64, 40 * math.pi, 40 * math.pi)
BAND = InitialCondition(band_limit=(0.8, 1.3))


def test_linear_evolution_profile_constant():
    cfg = RunConfig(grid=BOX, ic=BAND, epsilon=0.05, t_start=1.0, t_end=10.0, nonlinear=False,
                    output_times=(1.0, 2.5, 10.0), abort_on_boundary=False)
    traj = simulate(cfg)
    assert _profile_drift(traj) <= 1e-10


def test_zero_data_profile_constant():
    cfg = RunConfig(grid=BOX, ic=BAND, epsilon=0.0, t_start=1.0, t_end=5.0, output_times=(1.0, 5.0))
    traj = simulate(cfg)
    assert all(np.all(p.profile.coeffs == 0) for p in traj)


# --- Airy kernel -------------------------------------------------------------

def test_closed_kernel_reference_values():
    assert airy_kernel_closed(1 / 3, 0.0) == pytest.approx(0.3550280539, abs=1e-10)
    assert airy_kernel_closed(1.0, 0.0) == pytest.approx(3 ** (-1 / 3) * 0.355028053887817, rel=1e-13)
    # 3^(-1/3) Ai(0) = 0.24616270...
    assert airy_kernel_closed(1.0, 0.0) == pytest.approx(0.2461627039, abs=1e-10)


@given(st.floats(0.01, 500.0), st.floats(-100.0, 100.0))
def test_property_closed_kernel_scaling(t, x):
    lhs = airy_kernel_closed(t, x)
    rhs = t ** (-1 / 3) * airy_kernel_closed(1.0, t ** (-1 / 3) * x)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-14)


def test_closed_kernel_against_scipy():
    x = np.linspace(-30, 30, 601)
    for t in (0.5, 4.0):
        s = (3 * t) ** (-1 / 3)
        np.testing.assert_allclose(airy_kernel_closed(t, x), s * special.airy(x * s)[0], atol=1e-11)


def test_closed_kernel_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        airy_kernel_closed(0.0, 1.0)


@pytest.mark.parametrize("t", [1.0, 8.0])
def test_spectral_kernel_matches_closed_form(t):
    x = np.linspace(-20, 20, 4001)
    err = np.max(np.abs(airy_kernel_spectral(t, x) - airy_kernel_closed(t, x)))
    assert err <= 1e-6
    assert err <= 1e-10


def test_spectral_kernel_resolution_rule():
    with pytest.raises(ValueError, match="resolution rule"):
        SpectralKernelGrid(1.0, 20.0, 1.0, 1.6, 0.1).check()
    kg = kernel_grid(1.0, 20.0)
    kg.check()
    coarse = SpectralKernelGrid(kg.t, kg.x_max, kg.xi_cut, kg.xi_max, kg.d_xi * 3)
    with pytest.raises(ValueError, match="period"):
        coarse.check()
    with pytest.raises(ValueError):
        airy_kernel_spectral(1.0, np.array([0.0]), kgrid=coarse)
    with pytest.raises(ValueError):
        airy_kernel_spectral(1.0, np.array([50.0]), kgrid=kg)


def test_spectral_kernel_half_derivative():
    # beta = 1 against a direct trapezoid of the windowed integral of |xi| e^{i(t xi^3 + x xi)}
    t, x = 1.0, np.linspace(-5, 5, 11)
    got = airy_kernel_spectral(t, x, beta=1.0)
    xi = np.linspace(0, 8, 400001)
    integrand = xi[None, :] * np.cos(t * xi[None, :] ** 3 + x[:, None] * xi[None, :]) * np.exp(-(xi / 6.0) ** 24)
    ref = np.trapezoid(integrand, xi, axis=1) / math.pi
    np.testing.assert_allclose(got, ref, atol=5e-3)


def test_kernel_self_similarity():
    y = np.linspace(-20, 20, 2001)
    k1 = airy_kernel_spectral(1.0, y)
    for t in (10.0, 100.0):
        kt = airy_kernel_spectral(t, t ** (1 / 3) * y)
        dev = np.max(np.abs(t ** (1 / 3) * kt - k1)) / np.max(np.abs(k1))
        assert dev <= 0.01


def test_envelope_beta_zero_time_independent():
    c = envelope_check([1.0, 10.0, 100.0], 0.0, 0.0)
    assert np.all(np.isfinite(c))
    assert (c.max() - c.min()) / c.mean() <= 0.01


def test_envelope_beta_zero_against_dense_oracle():
    y = np.arange(-40.0, 40.0, 1e-4)
    one_d = np.max(np.abs(3 ** (-1 / 3) * special.airy(y * 3 ** (-1 / 3))[0]) * (1 + y * y) ** 0.125)
    c = envelope_check([1.0], 0.0, 0.0)[0]
    assert c == pytest.approx(one_d**2, rel=1e-4)


def test_envelope_with_derivative_finite():
    c = envelope_check([1.0], 0.45, 0.45)
    assert np.all(np.isfinite(c)) and np.all(c > 0)
    c_mixed = envelope_check([1.0], 0.45, 0.0)
    assert np.isfinite(c_mixed[0])
    with pytest.raises(ValueError):
        envelope_check([1.0], 0.6, 0.0)


# --- weak Lebesgue norms ----------------------------------------------------

def test_weak_norm_of_unit_square_indicator():
    n = 50
    vals = np.zeros((2 * n, 2 * n))
    vals[:n, :n] = 1.0
    for p in (1.0, 4.0, 6.0):
        rep = weak_lp_norm(vals.ravel(), p, cell_measure=(1.0 / n) ** 2)
        assert rep.quasi_norm == pytest.approx(1.0, rel=1e-12)
        assert rep.raw_sup_exact == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("p", [4.0, 6.0])
def test_weak_norm_of_pure_power(p):
    # |{|x|^(-2/p) >= lam}| = pi lam^(-p), so the quasi-norm is pi^(1/p)
    n = 2000
    dx = 2.0 / n
    c = -1.0 + dx * (np.arange(n) + 0.5)
    r = np.hypot(c[:, None], c[None, :])
    r0 = 50 * dx
    g = np.maximum(r, r0) ** (-2.0 / p)
    rep = weak_lp_norm(g.ravel(), p, cell_measure=dx * dx)
    assert rep.quasi_norm == pytest.approx(math.pi ** (1 / p), rel=0.05)
    fine = weak_lp_norm(g.ravel(), p, cell_measure=dx * dx, n_lambda=800)
    assert abs(fine.quasi_norm / rep.quasi_norm - 1) < 0.005


def test_weak_norm_report_invariants(rng):
    vals = rng.standard_normal(5000)
    rep = weak_lp_norm(vals, 4.0, cell_measure=0.01)
    assert rep.quasi_norm == pytest.approx(rep.raw_sup ** 0.25)
    assert np.all(np.diff(rep.measures) <= 0)
    assert np.all(np.diff(rep.lambda_grid) > 0)
    assert rep.raw_sup <= rep.raw_sup_exact * (1 + 1e-12)


def test_weak_norm_zero_and_errors():
    rep = weak_lp_norm(np.zeros(10), 4.0, cell_measure=1.0)
    assert rep.quasi_norm == 0.0
    with pytest.raises(ValueError):
        weak_lp_norm(np.ones(3), 0.5, cell_measure=1.0)
    with pytest.raises(ValueError):
        weak_lp_norm(np.ones(3), 4.0)


def test_kernel_sample_validation():
    with pytest.raises(ValueError):
        KernelSample(0.0, np.zeros((1, 2)), np.zeros(1))
    with pytest.raises(ValueError):
        KernelSample(1.0, np.zeros((1, 2)), np.array([np.nan]))


def test_kernel_samples_are_products():
    s = kernel_samples_2d(2.0, y_lo=-4, y_hi=2, dy=0.5)
    xa, xb = s.points[:, 0], s.points[:, 1]
    ref = airy_kernel_closed(2.0, xa) * airy_kernel_closed(2.0, xb)
    np.testing.assert_allclose(s.values, ref, atol=1e-10)
    assert s.cell_measure == pytest.approx((0.5 * 2 ** (1 / 3)) ** 2)


def test_kernel_weak_lp_scaling_exponents():
    rows = kernel_weak_lp_scaling([1.0, 8.0, 64.0], [4.0, 6.0])
    for r in rows:
        assert r["deviation"] <= 0.05
        assert abs(r["exponent"] - r["predicted_exponent"]) <= 0.03
