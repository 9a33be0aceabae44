"""Norms of the bootstrap framework and power-law fits of their decay.

Norms are taken in the ab frame.  ``w_a = ||x_a f||_2`` uses box-centred
coordinates and is only meaningful while the solution stays away from the box
edge; every report carries ``boundary_mass`` (fraction of ``||v||_2^2`` in the
outer strip of width ``len/16``) so weighted values can be flagged.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np
import scipy.fft as sfft

from .grid import GridSpec, MultiplierKind, MultiplierSpec, make_grid
from .linear import ProfileSnapshot
from .pseudo import pseudospectral

__all__ = [
    "BOUNDARY_STRIP_FRACTION",
    "NormReport",
    "DecayFit",
    "ScatteringReport",
    "CubicScan",
    "boundary_mass",
    "norms",
    "decay_fit",
    "h2_distance",
    "scattering_report",
    "xnorm",
    "xnorm_series",
    "cubic_amplitude_scan",
]

BOUNDARY_STRIP_FRACTION = 1.0 / 16.0
DEFAULT_BOUNDARY_THRESHOLD = 1e-6


def _strip_mask(spec: GridSpec) -> np.ndarray:
    grid = make_grid(spec)
    wa = BOUNDARY_STRIP_FRACTION * spec.len_a
    wb = BOUNDARY_STRIP_FRACTION * spec.len_b
    ma = np.abs(grid.x_a) >= 0.5 * spec.len_a - wa
    mb = np.abs(grid.x_b) >= 0.5 * spec.len_b - wb
    return ma[:, None] | mb[None, :]


def boundary_mass(values: np.ndarray, spec: GridSpec) -> float:
    """Fraction of ``sum v^2`` carried by cells in the outer strip."""
    total = float(np.sum(values * values))
    if total == 0.0:
        return 0.0
    return float(np.sum((values * values)[_strip_mask(spec)])) / total


@dataclass(frozen=True)
class NormReport:
    t: float
    l2: float
    h3: float
    linf: float
    linf_grad: float
    linf_half_a: float
    linf_half_b: float
    w_a: float
    w_b: float
    dtf_h2: float
    boundary_mass: float
    weighted_reliable: bool = True

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_row(self) -> dict:
        return asdict(self)


def _half_weight(spec: GridSpec) -> np.ndarray:
    """Multiplicity of half-spectrum columns in the full spectrum."""
    nb = spec.n_b
    w = np.full(nb // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w[None, :]


def _sobolev(h: np.ndarray, spec: GridSpec, s: float) -> float:
    """H^s norm from a raw half spectrum."""
    ps = pseudospectral(spec)
    weight = ps.multiplier(MultiplierSpec(MultiplierKind.SOBOLEV_WEIGHT, s))
    n = spec.n_a * spec.n_b
    energy = np.sum(_half_weight(spec) * np.abs(weight * h) ** 2) / n**2
    return math.sqrt(spec.area * float(energy))


def norms(state, profile: ProfileSnapshot, *, nonlinear: bool = True,
          boundary_threshold: float = DEFAULT_BOUNDARY_THRESHOLD) -> NormReport:
    """All norms of a state and its profile.

    ``L^inf`` quantities are maxima over the 2x refined grid of the
    trigonometric interpolant; the gradient is the ab-frame gradient
    magnitude.  ``dtf_h2 = ||(d_a + d_b)(v^3)||_{H^2}`` equals
    ``||d_t f||_{H^2}`` because the linear flow is an H^2 isometry; it is zero
    for linear runs (``nonlinear=False``).
    """
    fld = getattr(state, "field", state)
    spec = fld.grid
    ps = pseudospectral(spec)
    grid = ps.grid
    h = ps.to_half(fld.values)
    l2 = _sobolev(h, spec, 0.0)
    h3 = _sobolev(h, spec, 3.0)
    linf = float(np.max(np.abs(ps.padded_physical(h))))
    da = ps.multiplier(MultiplierSpec(MultiplierKind.DERIVATIVE_A, 1))
    db = ps.multiplier(MultiplierSpec(MultiplierKind.DERIVATIVE_B, 1))
    ga = ps.padded_physical(da * h)
    gb = ps.padded_physical(db * h)
    linf_grad = float(np.sqrt(np.max(ga * ga + gb * gb)))
    half_a = ps.multiplier(MultiplierSpec(MultiplierKind.FRACTIONAL_ABS_A, 0.5))
    half_b = ps.multiplier(MultiplierSpec(MultiplierKind.FRACTIONAL_ABS_B, 0.5))
    linf_half_a = float(np.max(np.abs(ps.padded_physical(half_a * h))))
    linf_half_b = float(np.max(np.abs(ps.padded_physical(half_b * h))))
    if nonlinear:
        c, _ = ps.cube(ps.project(h))
        dtf = _sobolev(ps.dsum * c, spec, 2.0)
    else:
        dtf = 0.0
    # profile in physical space
    n = spec.n_a * spec.n_b
    fphys = (sfft.ifft2(profile.coeffs * grid.signs()) * n).real
    xa, xb = grid.mesh()
    cell = spec.cell_area
    w_a = math.sqrt(cell * float(np.sum((xa * fphys) ** 2)))
    w_b = math.sqrt(cell * float(np.sum((xb * fphys) ** 2)))
    bm = boundary_mass(fld.values, spec)
    return NormReport(
        t=float(fld.time), l2=l2, h3=h3, linf=linf, linf_grad=linf_grad, linf_half_a=linf_half_a,
        linf_half_b=linf_half_b, w_a=w_a, w_b=w_b, dtf_h2=dtf, boundary_mass=bm,
        weighted_reliable=bm <= boundary_threshold,
    )


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    intercept: float
    r_squared: float
    window: tuple[float, float]
    n_points: int

    def to_json(self) -> dict:
        return {"exponent": self.exponent, "intercept": self.intercept, "r2": self.r_squared,
                "window": list(self.window), "n_points": self.n_points}


def decay_fit(series, window: tuple[float, float] = (4.0, math.inf)) -> DecayFit:
    """Least-squares fit ``log value = intercept + exponent * log t`` over the
    points with ``t`` in ``window`` (inclusive)."""
    lo, hi = window
    if lo < 1:
        raise ValueError("fit window must start at t >= 1")
    pts = [(float(t), float(v)) for t, v in series if lo - 1e-12 <= t <= hi + 1e-12]
    if len(pts) < 4:
        raise ValueError(f"decay fit needs at least 4 points in the window, got {len(pts)}")
    t, v = np.array(pts).T
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise ValueError("decay fit needs positive finite values")
    x, y = np.log(t), np.log(v)
    a = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(float(slope), float(icpt), r2, (float(t.min()), float(t.max())), len(pts))


def h2_distance(p: ProfileSnapshot, q: ProfileSnapshot) -> float:
    """``||f_p - f_q||_{H^2}`` from the normalised spectral coefficients."""
    if p.grid != q.grid:
        raise ValueError("profiles live on different grids")
    grid = make_grid(p.grid)
    w = MultiplierSpec(MultiplierKind.SOBOLEV_WEIGHT, 2.0).symbol(grid)
    return math.sqrt(p.grid.area * float(np.sum(np.abs(w * (p.coeffs - q.coeffs)) ** 2)))


@dataclass(frozen=True)
class ScatteringReport:
    pairs: list[tuple[float, float, float]]
    dtf_fit: DecayFit | None
    extrapolated_tail: float
    tail_divergent: bool

    def to_json(self) -> dict:
        return {
            "pairs": [list(p) for p in self.pairs],
            "dtf_fit": self.dtf_fit.to_json() if self.dtf_fit else None,
            "extrapolated_tail": self.extrapolated_tail if math.isfinite(self.extrapolated_tail) else None,
            "tail_divergent": self.tail_divergent,
        }


def _is_dyadic(t: float) -> bool:
    k = round(math.log2(t)) if t > 0 else None
    return k is not None and abs(t - 2.0**k) <= 1e-9 * t


def scattering_report(profiles, dtf_series=None, window=(4.0, math.inf)) -> ScatteringReport:
    """Cauchy increments of the profile along dyadic times and the tail bound.

    ``profiles`` are ProfileSnapshots; those at dyadic times ``2^k`` are used
    for consecutive increments.  ``dtf_series`` is a list of ``(t, ||d_t f||_{H^2})``;
    the tail estimate integrates its fitted power law from the last time to
    infinity and is finite only for exponents below -1.
    """
    dyadic = sorted((p for p in profiles if _is_dyadic(p.time)), key=lambda p: p.time)
    if len(dyadic) < 4:
        raise ValueError(f"scattering report needs at least 4 dyadic snapshots, got {len(dyadic)}")
    pairs = [(a.time, b.time, h2_distance(b, a)) for a, b in zip(dyadic, dyadic[1:])]
    fit = None
    tail, divergent = math.inf, True
    if dtf_series:
        series = [(t, v) for t, v in dtf_series if v > 0]
        if len(series) >= 4 and any(t >= window[0] for t, _ in series):
            fit = decay_fit(series, window)
            big_t = fit.window[1]
            if fit.exponent < -1.0:
                divergent = False
                tail = math.exp(fit.intercept) * big_t ** (fit.exponent + 1.0) / (-fit.exponent - 1.0)
    return ScatteringReport(pairs, fit, tail, divergent)


def xnorm_series(trajectory) -> list[tuple[float, float]]:
    """Running sup of ``max(h3, w_a, w_b)`` at each output time."""
    out, running = [], 0.0
    for point in trajectory:
        rep = point.norms if hasattr(point, "norms") else point
        running = max(running, rep.h3, rep.w_a, rep.w_b)
        out.append((rep.t, running))
    return out


def xnorm(trajectory) -> float:
    if not trajectory:
        raise ValueError("empty trajectory")
    return xnorm_series(trajectory)[-1][1]


@dataclass(frozen=True)
class CubicScan:
    rows: list[tuple[float, float]]
    slope: float | None
    horizon: float

    def ratio(self) -> list[float]:
        """Successive ratios of ``||f(T) - f(t_start)||_{H^2}``."""
        vals = [d for _, d in self.rows]
        return [b / a for a, b in zip(vals, vals[1:]) if a > 0]


def cubic_amplitude_scan(epsilons, horizon: float, base_config, simulate_fn=None) -> CubicScan:
    """``||f(T) - f(t_start)||_{H^2}`` for each amplitude, and the log-log slope.

    Each run uses ``base_config`` with ``epsilon`` replaced and output times
    ``(t_start, horizon)``.  Aborted runs propagate their exception.
    """
    if simulate_fn is None:
        from .solver import simulate as simulate_fn
    rows = []
    for eps in epsilons:
        cfg = replace(base_config, epsilon=float(eps), t_end=float(horizon),
                      output_times=(base_config.t_start, float(horizon)))
        traj = simulate_fn(cfg)
        rows.append((float(eps), h2_distance(traj[-1].profile, traj[0].profile)))
    pos = [(e, d) for e, d in rows if e > 0 and d > 0]
    slope = None
    if len(pos) >= 2:
        x, y = np.log([e for e, _ in pos]), np.log([d for _, d in pos])
        slope = float(np.polyfit(x, y, 1)[0])
    return CubicScan(rows, slope, float(horizon))
