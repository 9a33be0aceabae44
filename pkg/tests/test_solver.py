import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mzk.diagnostics import h2_distance
from mzk.grid import Field, Frame, GridSpec, InitialCondition, forward, inverse, make_grid
from mzk.linear import ProfileSnapshot, profile_of, propagate_linear
from mzk.pseudo import pseudospectral
from mzk.resonance import PhasePoint, phase
from mzk.solver import (
    BlowUpAbort,
    RunConfig,
    SimState,
    StepSizeError,
    TrilinearQuery,
    WraparoundAbort,
    default_output_times,
    duhamel_oracle,
    initial_state,
    nonlinear_rhs,
    oracle_equivalence,
    reflect,
    simulate,
    step,
    trilinear_pseudospectral,
)

UNIT = GridSpec(8, 8, 2 * math.pi, 2 * math.pi)
BAND = InitialCondition(band_limit=(0.8, 1.3))
SMALL = GridSpec(64, 64, 32 * math.pi, 32 * math.pi)


def _state(spec, values, t=0.0):
    return SimState(Field(spec, values, t, Frame.AB), t)


def _retained(spec, rng):
    """Random real field on the modes the solver keeps."""
    ps = pseudospectral(spec)
    return ps.to_physical(ps.project(ps.to_half(rng.standard_normal(spec.shape))))


# --- nonlinear term ----------------------------------------------------------

def test_rhs_of_zero_is_zero():
    assert np.all(nonlinear_rhs(_state(UNIT, np.zeros(UNIT.shape))).coeffs == 0)


def test_rhs_single_mode_trig_identity():
    xa, _ = make_grid(UNIT).mesh()
    out = inverse(nonlinear_rhs(_state(UNIT, np.cos(xa))))
    # -(d_a)(3 cos x + cos 3x)/4
    np.testing.assert_allclose(out.values, 0.75 * (np.sin(xa) + np.sin(3 * xa)), atol=1e-12)


def test_rhs_mixed_modes_trig_identity():
    spec = GridSpec(16, 16, 2 * math.pi, 2 * math.pi)
    xa, xb = make_grid(spec).mesh()
    v = np.cos(xa) + np.sin(2 * xb)
    out = inverse(nonlinear_rhs(_state(spec, v))).values
    # (d_a + d_b)(v^3) = 3 v^2 (d_a v + d_b v); highest mode 6 fits the 16-point grid
    dv3 = 3 * v**2 * (-np.sin(xa) + 2 * np.cos(2 * xb))
    np.testing.assert_allclose(out, -dv3, atol=1e-11)


def test_oracle_equivalence_small():
    res = oracle_equivalence(8, trials=10, s=1.0, seed=3)
    assert res["max_relative_deviation"] <= 1e-10
    for key in ("solver_rhs", "dealiased", "aliased"):
        assert res[f"max_relative_deviation_{key}"] <= 1e-10


def test_oracle_single_mode():
    # f concentrated on k0: output only at 3 k0, equal to exp(-i s phi) i(xi_a + xi_b) f^3
    g = make_grid(UNIT)
    f = np.zeros(UNIT.shape, complex)
    f[1, 0] = 0.3 - 0.2j
    s = 0.7
    out = duhamel_oracle(TrilinearQuery(UNIT, s, ProfileSnapshot(UNIT, s, f)))
    nz = np.argwhere(np.abs(out) > 1e-14)
    assert nz.tolist() == [[3, 0]]
    k0 = (g.k_a[1], g.k_b[0])
    phi = phase(PhasePoint((3 * k0[0], 3 * k0[1]), k0, k0))
    expected = np.exp(-1j * s * phi) * 1j * (3 * k0[0] + 3 * k0[1]) * f[1, 0] ** 3
    assert out[3, 0] == pytest.approx(expected, abs=1e-14)
    fast = trilinear_pseudospectral(ProfileSnapshot(UNIT, s, f), s)
    np.testing.assert_allclose(fast, out, atol=1e-14)


def test_oracle_zero_and_validation():
    z = ProfileSnapshot(UNIT, 1.0, np.zeros(UNIT.shape))
    assert np.all(duhamel_oracle(TrilinearQuery(UNIT, 1.0, z, "one")) == 0)
    with pytest.raises(ValueError):
        TrilinearQuery(GridSpec(32, 16, 1.0, 1.0), 1.0, ProfileSnapshot(GridSpec(32, 16, 1.0, 1.0), 1.0,
                                                                       np.zeros((32, 16))))
    with pytest.raises(ValueError):
        TrilinearQuery(UNIT, 1.0, z, "m_eta")
    with pytest.raises(ValueError):
        TrilinearQuery(GridSpec(8, 8, 1.0, 1.0), 1.0, z)


def test_aliasing_is_visible_without_padding(rng):
    f = rng.standard_normal(UNIT.shape) + 1j * rng.standard_normal(UNIT.shape)
    prof = ProfileSnapshot(UNIT, 0.0, f)
    a = trilinear_pseudospectral(prof, 0.0, "one", aliased=True)
    d = trilinear_pseudospectral(prof, 0.0, "one", aliased=False)
    assert np.max(np.abs(a - d)) > 1e-3 * np.max(np.abs(d))


# --- stepping ------------------------------------------------------------------

def test_zero_state_unchanged_except_time():
    s = step(_state(SMALL, np.zeros(SMALL.shape), 1.0), 0.1)
    assert s.time == pytest.approx(1.1) and s.step_count == 1
    assert np.all(s.field.values == 0)


def test_linear_step_matches_exact_flow(rng):
    v = _retained(SMALL, rng)
    out = step(_state(SMALL, v, 2.0), 0.37, nonlinear=False)
    ref = inverse(propagate_linear(forward(Field(SMALL, v, 2.0)), 0.37))
    assert np.max(np.abs(out.field.values - ref.values)) <= 1e-13 * np.max(np.abs(v))
    assert out.time == pytest.approx(ref.time)


def test_step_size_rules(rng):
    st0 = _state(SMALL, _retained(SMALL, rng))
    with pytest.raises(StepSizeError):
        step(st0, 0.2, dt_max=0.1)
    with pytest.raises(StepSizeError):
        step(st0, 0.0)
    with pytest.raises(StepSizeError):
        step(st0, 1.0)  # |v| ~ 1: violates the nonlinear step rule


def _integrate(state, total, n):
    h = total / n
    for _ in range(n):
        state = step(state, h)
    return state


def test_fourth_order_convergence():
    spec = GridSpec(32, 32, 8 * math.pi, 8 * math.pi)
    ic = InitialCondition(epsilon=1.0, band_limit=(0.8, 1.3))
    s0 = initial_state(RunConfig(grid=spec, ic=ic, epsilon=1.0, t_start=0.0, t_end=1.0))
    total = 0.4
    ref = _integrate(s0, total, 16).field.values
    e1 = np.max(np.abs(_integrate(s0, total, 4).field.values - ref))
    e2 = np.max(np.abs(_integrate(s0, total, 8).field.values - ref))
    assert e2 > 1e-13
    assert 12.0 <= e1 / e2 <= 20.0


def test_time_reversal():
    cfg = RunConfig(grid=GridSpec(128, 128, 64 * math.pi, 64 * math.pi), ic=BAND, epsilon=0.05,
                    t_start=0.0, t_end=4.0)
    s0 = initial_state(cfg)
    s1 = _integrate(s0, 4.0, 40)
    back = reflect(_integrate(reflect(s1), 4.0, 40))
    dev = np.max(np.abs(back.field.values - s0.field.values)) / np.max(np.abs(s0.field.values))
    assert dev <= 1e-6
    # the linear flow reverses exactly
    lin = reflect(_linear(reflect(_linear(s0, 4.0)), 4.0))
    assert np.max(np.abs(lin.field.values - s0.field.values)) <= 1e-12


def _linear(state, t):
    return step(state, t, nonlinear=False)


def test_reflect_is_involution(rng):
    s = _state(UNIT, rng.standard_normal(UNIT.shape))
    np.testing.assert_array_equal(reflect(reflect(s)).field.values, s.field.values)
    g = make_grid(UNIT)
    xa, xb = g.mesh()
    r = reflect(_state(UNIT, np.sin(xa + 2 * xb) + np.cos(xb)))
    np.testing.assert_allclose(r.field.values, np.sin(xa + 2 * xb) - np.cos(xb), atol=1e-14)


# --- runs --------------------------------------------------------------------

def test_output_times():
    t = default_output_times(1.0, 64.0, 4)
    assert len(t) == 25 and t[0] == 1.0 and t[-1] == 64.0
    assert t[4] == 2.0
    assert default_output_times(0.0, 4.0, 1) == [0.0, 1.0, 2.0, 4.0]
    assert default_output_times(0.0, 0.5, 2) == [0.0, 0.5]
    assert default_output_times(1.0, 3.0, 1) == [1.0, 2.0, 3.0]


@pytest.mark.parametrize("kw", [dict(epsilon=-0.1), dict(t_end=0.5), dict(dt_max=0.0), dict(cfl_safety=1.0),
                                dict(output_times=(2.0, 1.5)), dict(output_times=(0.5, 2.0)),
                                dict(blowup_factor=1.0), dict(boundary_mass_threshold=0.0)])
def test_run_config_rejects(kw):
    with pytest.raises(ValueError):
        RunConfig(grid=SMALL, **kw)


def test_run_config_hash_and_epsilon_override():
    a = RunConfig(grid=SMALL, ic=BAND, epsilon=0.07)
    assert a.ic.epsilon == 0.07
    assert a.hash() == RunConfig(grid=SMALL, ic=BAND, epsilon=0.07).hash()
    assert a.hash() != replace(a, epsilon=0.08).hash()


def test_simulate_hits_output_times_and_conserves_l2():
    cfg = RunConfig(grid=GridSpec(128, 128, 64 * math.pi, 64 * math.pi), ic=BAND, epsilon=0.1, t_start=1.0, t_end=4.0, dt_max=0.1,
                    output_times=(1.0, 1.25, 2.0, 3.3, 4.0))
    traj = simulate(cfg)
    assert [p.state.time for p in traj] == [1.0, 1.25, 2.0, 3.3, 4.0]
    l2 = np.array([p.norms.l2 for p in traj])
    assert np.max(np.abs(l2 / l2[0] - 1)) <= 1e-8
    assert all(p.state.config_hash == cfg.hash() for p in traj)


def test_zero_amplitude_norms_time_independent():
    cfg = RunConfig(grid=SMALL, ic=BAND, epsilon=0.0, t_start=1.0, t_end=3.0, output_times=(1.0, 2.0, 3.0))
    rows = [p.norms.as_row() for p in simulate(cfg)]
    for key in ("l2", "h3", "linf", "w_a", "dtf_h2"):
        assert len({r[key] for r in rows}) == 1


def test_linear_run_norms_invariant():
    cfg = RunConfig(grid=SMALL, ic=BAND, epsilon=0.05, t_start=1.0, t_end=3.0, nonlinear=False,
                    output_times=(1.0, 2.0, 3.0))
    traj = simulate(cfg)
    for key in ("l2", "h3", "w_a", "w_b"):
        vals = [getattr(p.norms, key) for p in traj]
        assert max(vals) == pytest.approx(min(vals), rel=1e-10)


def test_cubic_correction_ratio():
    base = RunConfig(grid=GridSpec(128, 128, 64 * math.pi, 64 * math.pi), ic=BAND, t_start=1.0, t_end=2.0,
                     output_times=(1.0, 2.0))

    def delta(eps):
        traj = simulate(replace(base, epsilon=eps))
        return h2_distance(traj[-1].profile, traj[0].profile)

    assert 7.0 <= delta(0.1) / delta(0.05) <= 9.0


def test_wraparound_abort_carries_trajectory():
    cfg = RunConfig(grid=GridSpec(32, 32, 8 * math.pi, 8 * math.pi), ic=BAND, epsilon=0.05, t_start=1.0,
                    t_end=30.0)
    with pytest.raises(WraparoundAbort) as exc:
        simulate(cfg)
    assert exc.value.diagnostics["boundary_mass"] > cfg.boundary_mass_threshold
    assert exc.value.trajectory and exc.value.trajectory[0].state.time == 1.0
    relaxed = simulate(replace(cfg, t_end=2.0, output_times=None, abort_on_boundary=False))
    assert relaxed[-1].state.time == 2.0


def test_blow_up_abort():
    # a tiny blow-up factor trips on the first output after the cubic term has acted
    cfg = RunConfig(grid=GridSpec(32, 32, 8 * math.pi, 8 * math.pi), ic=InitialCondition(epsilon=2.0),
                    epsilon=2.0, t_start=0.0, t_end=1.0, blowup_factor=1.0001, abort_on_boundary=False,
                    output_times=(0.0, 1.0))
    with pytest.raises(BlowUpAbort) as exc:
        simulate(cfg)
    assert exc.value.reason == "blow-up"


@given(st.floats(0.001, 0.05), st.integers(0, 10_000))
def test_property_l2_conserved_per_step(eps, seed):
    rng = np.random.default_rng(seed)
    spec = GridSpec(16, 16, 4 * math.pi, 4 * math.pi)
    v = eps * _retained(spec, rng)
    s = _state(spec, v)
    out = step(s, 0.05)
    assert Field(spec, out.field.values).l2_norm() == pytest.approx(Field(spec, v).l2_norm(), rel=1e-9)


@given(st.floats(0.001, 0.05))
def test_property_profile_of_nonlinear_run_starts_at_ic(eps):
    cfg = RunConfig(grid=SMALL, ic=BAND, epsilon=eps, t_start=1.0,
                    t_end=1.5, output_times=(1.0, 1.5))
    traj = simulate(cfg)
    prof0 = profile_of(initial_state(cfg))
    np.testing.assert_allclose(traj[0].profile.coeffs, prof0.coeffs, atol=1e-18)
