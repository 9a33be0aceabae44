"""Time integration of ``dv/dt + d_a^3 v + d_b^3 v + (d_a + d_b)(v^3) = 0``.

The stepper is a fourth-order integrating-factor Runge-Kutta scheme: the
linear flow is applied exactly in Fourier space and the cubic term is
evaluated pseudospectrally with 2x zero padding (exact for cubic products).
The solver works on the retained mode set of the grid: Nyquist modes, and any
mode beyond ``dealias_fraction``, are projected out.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple

import numpy as np
import scipy.fft as sfft

from .grid import (
    Field,
    Frame,
    GridSpec,
    InitialCondition,
    SpectralField,
    evaluate_ic,
    fft_workers,
    forward,
    make_grid,
)
from .linear import ProfileSnapshot, profile_of
from .pseudo import pseudospectral

__all__ = [
    "SimState",
    "RunConfig",
    "TrilinearQuery",
    "TrajectoryPoint",
    "SimulationAborted",
    "WraparoundAbort",
    "BlowUpAbort",
    "StepSizeError",
    "default_output_times",
    "initial_state",
    "nonlinear_rhs",
    "step",
    "simulate",
    "reflect",
    "duhamel_oracle",
    "trilinear_pseudospectral",
    "oracle_equivalence",
]


class StepSizeError(ValueError):
    """The requested step violates ``h <= dt_max`` or the nonlinear rule."""


class SimulationAborted(RuntimeError):
    def __init__(self, reason: str, diagnostics: dict, trajectory: list | None = None):
        super().__init__(f"{reason}: {diagnostics}")
        self.reason = reason
        self.diagnostics = diagnostics
        self.trajectory = trajectory or []


class WraparoundAbort(SimulationAborted):
    """Mass reached the boundary strip; the periodic box no longer models the plane."""


class BlowUpAbort(SimulationAborted):
    """A norm grew past the blow-up factor or the state became non-finite."""


@dataclass(frozen=True, eq=False)
class SimState:
    field: Field
    time: float
    step_count: int = 0
    config_hash: str = ""

    def __post_init__(self):
        if self.field.frame != Frame.AB:
            raise ValueError("simulation states live in the ab frame")


def default_output_times(t_start: float = 1.0, t_end: float = 64.0, per_octave: int = 4) -> list[float]:
    """Times ``t_start * 2^(j/per_octave)`` up to ``t_end`` (always included).

    For ``t_start = 0`` the grid is ``0`` followed by the octave grid from
    ``min(1, t_end)``.
    """
    if per_octave < 1:
        raise ValueError("per_octave must be >= 1")
    if t_start <= 0.0:
        first = min(1.0, t_end)
        return [0.0] + (default_output_times(first, t_end, per_octave) if first < t_end else [t_end])
    n = int(math.floor(per_octave * math.log2(t_end / t_start) + 1e-9))
    times = [t_start * 2.0 ** (j / per_octave) for j in range(n + 1)]
    if times[-1] < t_end * (1 - 1e-12):
        times.append(t_end)
    return times


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one run.  ``epsilon`` overrides ``ic.epsilon``.

    ``nonlinear=False`` integrates the linear flow only.  When
    ``abort_on_boundary`` is false the run continues past the boundary-mass
    threshold and the reports carry the mass instead.
    """

    grid: GridSpec
    ic: InitialCondition = field(default_factory=InitialCondition)
    epsilon: float = 0.05
    t_start: float = 1.0
    t_end: float = 64.0
    dt_max: float = 0.1
    cfl_safety: float = 0.5
    output_times: tuple[float, ...] | None = None
    boundary_mass_threshold: float = 1e-6
    blowup_factor: float = 1e3
    nonlinear: bool = True
    abort_on_boundary: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError("epsilon must be finite and >= 0")
        if not (math.isfinite(self.t_start) and self.t_start >= 0):
            raise ValueError("t_start must be finite and >= 0")
        if not (math.isfinite(self.t_end) and self.t_end > self.t_start):
            raise ValueError("t_end must exceed t_start")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if not 0 < self.cfl_safety < 1:
            raise ValueError("cfl_safety must lie in (0, 1)")
        if not self.boundary_mass_threshold > 0:
            raise ValueError("boundary_mass_threshold must be positive")
        if not self.blowup_factor > 1:
            raise ValueError("blowup_factor must exceed 1")
        times = self.output_times
        if times is None:
            times = default_output_times(self.t_start, self.t_end)
        times = tuple(float(t) for t in times)
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("output_times must be strictly increasing")
        if times and (times[0] < self.t_start - 1e-12 or times[-1] > self.t_end + 1e-12):
            raise ValueError("output_times must lie in [t_start, t_end]")
        object.__setattr__(self, "output_times", times)
        object.__setattr__(self, "ic", replace(self.ic, epsilon=self.epsilon))

    def to_dict(self) -> dict:
        """Plain dict in the configuration-file layout."""
        d = asdict(self)
        del d["ic"]["epsilon"]  # carried by the top-level epsilon
        d["output_times"] = list(self.output_times)
        return d

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class TrajectoryPoint(NamedTuple):
    state: SimState
    profile: ProfileSnapshot
    norms: object


def _state_from_half(spec: GridSpec, h: np.ndarray, time: float, steps: int, cfg_hash: str) -> SimState:
    values = pseudospectral(spec).to_physical(h)
    return SimState(Field(spec, values, time, Frame.AB), time, steps, cfg_hash)


def initial_state(config: RunConfig) -> SimState:
    """Initial data sampled in the ab frame and projected on retained modes."""
    fld = evaluate_ic(config.ic, config.grid, Frame.AB, config.t_start)
    ps = pseudospectral(config.grid)
    h = ps.project(ps.to_half(fld.values))
    return _state_from_half(config.grid, h, config.t_start, 0, config.hash())


def nonlinear_rhs(state: SimState) -> SpectralField:
    """``-(d_a + d_b)(P v)^3`` projected on the retained modes, where ``P``
    removes Nyquist and dealias-truncated modes."""
    spec = state.field.grid
    ps = pseudospectral(spec)
    h = ps.project(ps.to_half(state.field.values))
    r, _ = ps.rhs(h)
    if not np.all(np.isfinite(r)):
        raise FloatingPointError("non-finite nonlinear term")
    values = ps.to_physical(r)
    return forward(Field(spec, values, state.time, Frame.AB))


def _max_step(vmax: float, k_max: float, cfl_safety: float) -> float:
    freq = vmax * vmax * k_max
    return math.inf if freq == 0 else cfl_safety / freq


def _if_rk4(ps, h_arr: np.ndarray, dt: float, nonlinear: bool, cfl_safety: float, dt_max: float,
            k1=None):
    """One integrating-factor RK4 step on a half spectrum."""
    if dt > dt_max * (1 + 1e-12):
        raise StepSizeError(f"step {dt} exceeds dt_max {dt_max}")
    e_half = ps.semigroup(0.5 * dt)
    e_full = e_half * e_half
    if not nonlinear:
        return e_full * h_arr
    if k1 is None:
        k1, vmax = ps.rhs(h_arr)
        if dt > _max_step(vmax, ps.k_max, cfl_safety) * (1 + 1e-12):
            raise StepSizeError(f"step {dt} violates the nonlinear step rule (max |v| = {vmax:.3g})")
    k2, _ = ps.rhs(e_half * (h_arr + 0.5 * dt * k1))
    k3, _ = ps.rhs(e_half * h_arr + 0.5 * dt * k2)
    k4, _ = ps.rhs(e_full * h_arr + dt * (e_half * k3))
    out = e_full * h_arr + (dt / 6.0) * (e_full * k1 + 2.0 * e_half * (k2 + k3) + k4)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite state after step")
    return out


def step(state: SimState, h: float, *, dt_max: float = math.inf, cfl_safety: float = 0.5,
         nonlinear: bool = True) -> SimState:
    """Advance ``state`` by ``h > 0`` with one integrating-factor RK4 step.

    Raises :class:`StepSizeError` if ``h > dt_max`` or
    ``h > cfl_safety / (max|v|^2 k_max)``.  Backward integration goes
    through :func:`reflect`.
    """
    if not h > 0:
        raise StepSizeError("step size must be positive")
    spec = state.field.grid
    ps = pseudospectral(spec)
    h_arr = ps.project(ps.to_half(state.field.values))
    out = _if_rk4(ps, h_arr, h, nonlinear, cfl_safety, dt_max)
    return _state_from_half(spec, out, state.time + h, state.step_count + 1, state.config_hash)


def reflect(state: SimState) -> SimState:
    """``v(x) -> -v(-x)``.  Maps solutions run forward from ``v`` to the
    time-reversed evolution: if ``v(t)`` solves the equation so does
    ``-v(-t, -x)``."""
    vals = state.field.values
    flipped = -np.roll(np.flip(vals, axis=(0, 1)), shift=(1, 1), axis=(0, 1))
    return replace(state, field=replace(state.field, values=flipped))


def _blowup_metric(ps, h_arr: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(h_arr) ** 2)))


def simulate(config: RunConfig, *, initial: SimState | None = None, monitor_every: int = 25,
             on_output=None) -> list[TrajectoryPoint]:
    """Run ``config`` from ``t_start`` to ``t_end``.

    Output times are hit exactly by shortening steps.  The run aborts with
    :class:`WraparoundAbort` when the boundary mass exceeds the threshold
    (checked at outputs and every ``monitor_every`` steps) and with
    :class:`BlowUpAbort` when any reported norm exceeds ``blowup_factor``
    times its initial value.
    """
    from .diagnostics import boundary_mass, norms

    spec = config.grid
    ps = pseudospectral(spec)
    state0 = initial if initial is not None else initial_state(config)
    cfg_hash = config.hash()
    h_arr = ps.project(ps.to_half(state0.field.values))
    t = state0.time
    steps = 0
    trajectory: list[TrajectoryPoint] = []
    initial_norms = None
    targets = [tt for tt in config.output_times if tt >= t - 1e-12]
    h0 = _blowup_metric(ps, h_arr)

    def record(tt):
        nonlocal initial_norms
        st = _state_from_half(spec, h_arr, tt, steps, cfg_hash)
        prof = profile_of(st)
        rep = norms(st, prof, nonlinear=config.nonlinear)
        if initial_norms is None:
            initial_norms = rep
        point = TrajectoryPoint(st, prof, rep)
        trajectory.append(point)
        if on_output is not None:
            on_output(point)
        _check(rep, tt)

    def _check(rep, tt):
        if config.abort_on_boundary and rep.boundary_mass > config.boundary_mass_threshold:
            raise WraparoundAbort("wraparound", {"time": tt, "boundary_mass": rep.boundary_mass,
                                                 "threshold": config.boundary_mass_threshold}, trajectory)
        for name in ("l2", "h3", "linf", "dtf_h2"):
            v0, v = getattr(initial_norms, name), getattr(rep, name)
            if v0 > 0 and v > config.blowup_factor * v0:
                raise BlowUpAbort("blow-up", {"time": tt, "norm": name, "value": v, "initial": v0}, trajectory)

    if targets and abs(targets[0] - t) <= 1e-12:
        record(t)
        targets.pop(0)
    for target in targets:
        while t < target - 1e-12:
            k1 = None
            dt = min(config.dt_max, target - t)
            if config.nonlinear:
                k1, vmax = ps.rhs(h_arr)
                dt = min(dt, _max_step(vmax, ps.k_max, config.cfl_safety))
            try:
                h_arr = _if_rk4(ps, h_arr, dt, config.nonlinear, config.cfl_safety, config.dt_max, k1=k1)
            except FloatingPointError as exc:
                raise BlowUpAbort("blow-up", {"time": t, "error": str(exc)}, trajectory) from exc
            t = target if target - (t + dt) <= 1e-12 else t + dt
            steps += 1
            if _blowup_metric(ps, h_arr) > config.blowup_factor * max(h0, 1e-300):
                raise BlowUpAbort("blow-up", {"time": t, "norm": "l2"}, trajectory)
            if config.abort_on_boundary and steps % monitor_every == 0:
                bm = boundary_mass(ps.to_physical(h_arr), spec)
                if bm > config.boundary_mass_threshold:
                    raise WraparoundAbort("wraparound", {"time": t, "boundary_mass": bm,
                                                         "threshold": config.boundary_mass_threshold}, trajectory)
        record(target)
    return trajectory


# --- tiny-grid trilinear oracle -------------------------------------------------

SYMBOLS = ("m_xi", "one")


@dataclass(frozen=True, eq=False)
class TrilinearQuery:
    """Direct evaluation request for
    ``sum_{eta, sigma} exp(-i s phi) m(xi) f(eta) f(sigma) f(xi - eta - sigma)``.

    ``m_xi`` is the Fourier symbol ``i (xi_a + xi_b)`` of ``d_a + d_b``.
    With ``aliased=True`` the index ``xi - eta - sigma`` wraps around the
    grid (what an unpadded pseudospectral product computes); otherwise terms
    with ``xi - eta - sigma`` outside the grid are dropped (what a padded
    product computes).
    """

    grid: GridSpec
    s: float
    profile: ProfileSnapshot
    symbol: str = "m_xi"
    aliased: bool = False

    def __post_init__(self):
        if self.grid.n_a * self.grid.n_b > 256:
            raise ValueError(f"oracle grid too large: {self.grid.n_a}x{self.grid.n_b} > 256 modes")
        if self.symbol not in SYMBOLS:
            raise ValueError(f"unknown symbol {self.symbol!r}; known: {SYMBOLS}")
        if self.profile.grid != self.grid:
            raise ValueError("profile grid does not match query grid")


def _omega_table(grid) -> np.ndarray:
    ka, kb = grid.wavenumbers(odd=True)
    return ka**3 + kb**3


def _symbol_table(grid, symbol: str) -> np.ndarray:
    if symbol == "one":
        return np.ones(grid.shape)
    ka, kb = grid.wavenumbers(odd=True)
    return 1j * (ka + kb)


def duhamel_oracle(q: TrilinearQuery) -> np.ndarray:
    """Direct double sum over ``(eta, sigma)`` for every output mode ``xi``.

    Frequencies are mode indices; dispersion and symbol values are read from
    the grid tables (the same ones the pseudospectral path uses), so the
    phase of a term is ``omega(xi) - omega(eta) - omega(sigma) - omega(rho)``.
    Cost is ``O((n_a n_b)^3)``.
    """
    grid = make_grid(q.grid)
    na, nb = q.grid.shape
    ja, jb = np.meshgrid(grid.j_a, grid.j_b, indexing="ij")
    ja, jb = ja.ravel(), jb.ravel()
    omega = _omega_table(grid)
    f = q.profile.coeffs
    sym = _symbol_table(grid, q.symbol)
    # phase factors per mode: exp(+i s omega) for inputs, exp(-i s omega) for outputs
    g = (np.exp(1j * q.s * omega) * f).ravel()
    out = np.zeros(q.grid.shape, dtype=complex)
    ea = ja[:, None] + ja[None, :]
    eb = jb[:, None] + jb[None, :]
    pair = g[:, None] * g[None, :]
    for xa in grid.j_a:
        for xb in grid.j_b:
            ra, rb = xa - ea, xb - eb
            if q.aliased:
                valid = np.ones(ra.shape, dtype=bool)
            else:
                valid = (ra >= -(na // 2)) & (ra < na // 2) & (rb >= -(nb // 2)) & (rb < nb // 2)
            ia, ib = ra % na, rb % nb
            total = np.sum(np.where(valid, pair * g.reshape(na, nb)[ia, ib], 0.0))
            out[xa % na, xb % nb] = total
    return out * sym * np.exp(-1j * q.s * omega)


def trilinear_pseudospectral(profile: ProfileSnapshot, s: float, symbol: str = "m_xi",
                             aliased: bool = False) -> np.ndarray:
    """``e^{sL} m(D) (e^{-sL} f)^3`` via physical-space products.

    ``aliased=False`` pads by 2 in each direction (exact cubic product on the
    full mode set, including the Nyquist index); ``aliased=True`` forms the
    product on the grid itself.
    """
    spec = profile.grid
    grid = make_grid(spec)
    na, nb = spec.shape
    omega = _omega_table(grid)
    c = np.exp(1j * s * omega) * profile.coeffs
    if aliased:
        v = sfft.ifft2(c, workers=fft_workers()) * (na * nb)
        cube = sfft.fft2(v**3, workers=fft_workers()) / (na * nb)
    else:
        big = np.zeros((PADDED * na, PADDED * nb), dtype=complex)
        ra = np.concatenate([np.arange(na // 2), np.arange(PADDED * na - na // 2, PADDED * na)])
        rb = np.concatenate([np.arange(nb // 2), np.arange(PADDED * nb - nb // 2, PADDED * nb)])
        ia = np.concatenate([np.arange(na // 2), np.arange(na // 2, na)])
        ib = np.concatenate([np.arange(nb // 2), np.arange(nb // 2, nb)])
        big[np.ix_(ra, rb)] = c[np.ix_(ia, ib)]
        m_big = big.size
        v = sfft.ifft2(big, workers=fft_workers()) * m_big
        cube_big = sfft.fft2(v**3, workers=fft_workers()) / m_big
        cube = cube_big[np.ix_(ra, rb)]
    return cube * _symbol_table(grid, symbol) * np.exp(-1j * s * omega)


PADDED = 2


def oracle_equivalence(n: int = 8, trials: int = 100, s: float = 1.0, seed: int = 0,
                       length: float = 4.0 * math.pi) -> dict:
    """Cross-check the pseudospectral cubic term against :func:`duhamel_oracle`.

    Per trial: (1) a random real state: the solver's :func:`nonlinear_rhs`,
    moved to profile variables, must equal minus the dealiased oracle on the
    retained modes (the profile obeys ``d_t f = -D``); (2) a random complex
    profile: padded and unpadded physical-space products must equal the
    dealiased and aliased oracles.  Deviations are ``max|a - b| / max|b|``.
    """
    spec = GridSpec(n, n, length, length)
    grid = make_grid(spec)
    rng = np.random.default_rng(seed)
    omega = _omega_table(grid)
    mask = grid.retained_mask()
    worst = {"solver_rhs": 0.0, "dealiased": 0.0, "aliased": 0.0}

    def rel(a, b):
        scale = float(np.max(np.abs(b)))
        return float(np.max(np.abs(a - b))) / scale if scale > 0 else float(np.max(np.abs(a)))

    for _ in range(trials):
        state = SimState(Field(spec, rng.standard_normal(spec.shape), s, Frame.AB), s)
        rhs = nonlinear_rhs(state).coeffs
        prof = profile_of(state)
        prof = ProfileSnapshot(spec, s, prof.coeffs * mask)
        d = duhamel_oracle(TrilinearQuery(spec, s, prof, "m_xi", aliased=False))
        worst["solver_rhs"] = max(worst["solver_rhs"], rel((np.exp(-1j * s * omega) * rhs)[mask], -d[mask]))

        f = rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)
        cprof = ProfileSnapshot(spec, s, f)
        for aliased, key in ((False, "dealiased"), (True, "aliased")):
            direct = duhamel_oracle(TrilinearQuery(spec, s, cprof, "m_xi", aliased=aliased))
            fast = trilinear_pseudospectral(cprof, s, "m_xi", aliased=aliased)
            worst[key] = max(worst[key], rel(fast, direct))
    return {"n": n, "trials": trials, "s": s, "max_relative_deviation": max(worst.values()),
            **{f"max_relative_deviation_{k}": v for k, v in worst.items()}}
