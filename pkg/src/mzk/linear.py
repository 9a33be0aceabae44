"""Exact linear flow, profiles, the Airy kernel and weak Lebesgue norms.

The one-dimensional kernel ``k_t`` has Fourier transform ``exp(i t xi^3)``, so
``k_t(x) = (3t)^(-1/3) Ai(x / (3t)^(1/3))`` and the two-dimensional kernel
is the product ``K_t(x_a, x_b) = k_t(x_a) k_t(x_b)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .airy import airy_ai
from .grid import Field, Frame, GridSpec, MultiplierSpec, SpectralField, apply_multiplier, forward, make_grid

__all__ = [
    "ProfileSnapshot",
    "KernelSample",
    "WeakLpReport",
    "SpectralKernelGrid",
    "propagate_linear",
    "profile_of",
    "profile_to_state_coeffs",
    "airy_kernel_closed",
    "kernel_grid",
    "airy_kernel_spectral",
    "kernel_samples_2d",
    "envelope_check",
    "weak_lp_norm",
    "kernel_weak_lp_scaling",
]


@dataclass(frozen=True, eq=False)
class ProfileSnapshot:
    """Spectral coefficients of ``f(t) = e^{tL} v(t)``."""

    grid: GridSpec
    time: float
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.shape != self.grid.shape:
            raise ValueError("profile coefficients do not match the grid")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("profile coefficients are not finite")
        object.__setattr__(self, "coeffs", coeffs)

    def as_spectral(self) -> SpectralField:
        return SpectralField(self.grid, self.coeffs, self.time)


def propagate_linear(sf: SpectralField, dt: float) -> SpectralField:
    """Advance by ``dt`` under ``dv/dt + d_a^3 v + d_b^3 v = 0``."""
    out = apply_multiplier(sf, MultiplierSpec.semigroup(dt))
    return SpectralField(sf.grid, out.coeffs, sf.time + dt)


def profile_of(state) -> ProfileSnapshot:
    """Profile of a simulation state (or of a bare ab-frame :class:`Field`).

    ``f_hat(t, k) = exp(-i t (k_a^3 + k_b^3)) v_hat(t, k)``.
    """
    fld: Field = getattr(state, "field", state)
    if fld.frame != Frame.AB:
        raise ValueError("profiles are defined for ab-frame states")
    sf = forward(fld)
    undo = MultiplierSpec.semigroup(-fld.time).symbol(make_grid(fld.grid))
    return ProfileSnapshot(fld.grid, fld.time, sf.coeffs * undo)


def profile_to_state_coeffs(profile: ProfileSnapshot) -> np.ndarray:
    """Spectral coefficients of ``v(t) = e^{-tL} f(t)``."""
    flow = MultiplierSpec.semigroup(profile.time).symbol(make_grid(profile.grid))
    return profile.coeffs * flow


def airy_kernel_closed(t: float, x):
    """``k_t(x) = (3t)^(-1/3) Ai(x (3t)^(-1/3))``."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    s = (3.0 * t) ** (-1.0 / 3.0)
    return s * airy_ai(np.asarray(x, dtype=float) * s)


_WINDOW_POWER = 24
_XI_N_FACTOR = 1.6


@dataclass(frozen=True)
class SpectralKernelGrid:
    """Frequency grid for the windowed kernel sum.

    The kernel is ``sum_xi W(xi) |xi|^beta exp(i t xi^3 + i xi x) dxi / 2pi``
    with ``W(xi) = exp(-(xi/xi_cut)^24)`` summed over ``|xi| <= xi_max`` in
    steps ``d_xi``.  The sum is the periodisation of the windowed kernel
    with period ``2pi/d_xi``.
    """

    t: float
    x_max: float
    xi_cut: float
    xi_max: float
    d_xi: float

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.d_xi

    def required_period(self) -> float:
        # group-velocity spread of the windowed band plus the evaluation range
        return 3.0 * self.t * self.xi_max**2 + 2.0 * self.x_max + 20.0 * (3.0 * self.t) ** (1.0 / 3.0)

    def check(self) -> None:
        """Resolution rule.  Stationary points ``xi = sqrt(|x|/3t)`` of every
        evaluation point must sit at most a third of the way to the window
        edge, the window must be negligible where the sum stops, and the
        period must exceed the spread of the band so that images of the
        kernel do not overlap the evaluation range."""
        xi_stat = math.sqrt(self.x_max / (3.0 * self.t))
        if self.xi_cut < 3.0 * xi_stat:
            raise ValueError(
                f"resolution rule violated: window cutoff {self.xi_cut:.4g} below 3x stationary frequency {xi_stat:.4g}"
            )
        if self.xi_max < _XI_N_FACTOR * self.xi_cut * (1 - 1e-12):
            raise ValueError("resolution rule violated: frequency sum stops inside the window")
        if self.period < self.required_period() * (1 - 1e-12):
            raise ValueError(
                f"resolution rule violated: period {self.period:.4g} below required {self.required_period():.4g}"
            )


def kernel_grid(t: float, x_max: float) -> SpectralKernelGrid:
    """Smallest frequency grid satisfying :meth:`SpectralKernelGrid.check`."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if not x_max > 0:
        raise ValueError("x_max must be positive")
    xi_cut = 3.0 * math.sqrt(x_max / (3.0 * t)) + 3.0 * (3.0 * t) ** (-1.0 / 3.0)
    xi_max = _XI_N_FACTOR * xi_cut
    proto = SpectralKernelGrid(t, x_max, xi_cut, xi_max, 1.0)
    d_xi = 2.0 * math.pi / proto.required_period()
    return SpectralKernelGrid(t, x_max, xi_cut, xi_max, d_xi)


def airy_kernel_spectral(t: float, x, *, beta: float = 0.0, kgrid: SpectralKernelGrid | None = None,
                         chunk: int = 256) -> np.ndarray:
    """``|d|^beta k_t`` at the points ``x`` by a windowed discrete Fourier sum.

    With ``beta = 0`` this matches :func:`airy_kernel_closed` to better than
    ``1e-10`` absolute; ``beta > 0`` applies the symbol ``|xi|^beta``.
    """
    x = np.asarray(x, dtype=float)
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    x_max = float(np.max(np.abs(x))) if x.size else 0.0
    if kgrid is None:
        kgrid = kernel_grid(t, max(x_max, 1.0))
    elif x_max > kgrid.x_max * (1 + 1e-12):
        raise ValueError("evaluation points lie outside the kernel grid's range")
    kgrid.check()
    m = int(math.ceil(kgrid.xi_max / kgrid.d_xi))
    xi = kgrid.d_xi * np.arange(1, m + 1)
    weights = np.exp(-((xi / kgrid.xi_cut) ** _WINDOW_POWER)) * np.exp(1j * t * xi**3)
    if beta:
        weights = weights * xi**beta
    zero_term = 1.0 if beta == 0.0 else 0.0
    flat = x.ravel()
    out = np.empty(flat.shape)
    for start in range(0, flat.size, chunk):
        block = flat[start:start + chunk]
        s = np.exp(1j * np.outer(block, xi)) @ weights
        out[start:start + chunk] = (zero_term + 2.0 * s.real) * kgrid.d_xi / (2.0 * math.pi)
    return out.reshape(x.shape)


@dataclass(frozen=True, eq=False)
class KernelSample:
    """Samples of a kernel at ``points`` (shape ``(N, d)``); ``cell_measure``
    is the measure carried by each sample when it is read as a function on a
    grid."""

    t: float
    points: np.ndarray
    values: np.ndarray
    cell_measure: float | None = None

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("t must be positive")
        values = np.asarray(self.values)
        if not np.all(np.isfinite(values)):
            raise ValueError("kernel values must be finite")
        object.__setattr__(self, "values", values)


def _scaled_axis(t: float, y_lo: float, y_hi: float, dy: float) -> np.ndarray:
    n = int(round((y_hi - y_lo) / dy))
    return t ** (1.0 / 3.0) * (y_lo + dy * (np.arange(n) + 0.5))


def kernel_samples_2d(t: float, *, y_lo: float = -40.0, y_hi: float = 8.0, dy: float = 0.05,
                      beta_a: float = 0.0, beta_b: float = 0.0) -> KernelSample:
    """``K_t`` on a square grid in self-similar units: cell centres
    ``x = t^(1/3) y`` with ``y`` in ``[y_lo, y_hi)``.  The product structure
    means only two 1D kernel evaluations are needed."""
    x = _scaled_axis(t, y_lo, y_hi, dy)
    kg = kernel_grid(t, float(np.max(np.abs(x))))
    ka = airy_kernel_spectral(t, x, beta=beta_a, kgrid=kg)
    kb = ka if beta_b == beta_a else airy_kernel_spectral(t, x, beta=beta_b, kgrid=kg)
    xa, xb = np.meshgrid(x, x, indexing="ij")
    values = np.outer(ka, kb)
    cell = (dy * t ** (1.0 / 3.0)) ** 2
    return KernelSample(t, np.stack([xa.ravel(), xb.ravel()], axis=1), values.ravel(), cell)


def _envelope_1d(t: float, beta: float, y: np.ndarray) -> float:
    x = t ** (1.0 / 3.0) * y
    kg = kernel_grid(t, float(np.max(np.abs(x))))
    vals = airy_kernel_spectral(t, x, beta=beta, kgrid=kg)
    weight = t ** ((1.0 + beta) / 3.0) * (1.0 + y**2) ** ((0.25 - beta / 2.0) / 2.0)
    return float(np.max(np.abs(vals) * weight))


def envelope_check(t_list, beta_a: float, beta_b: float, *, y_max: float = 40.0, dy: float = 0.01) -> np.ndarray:
    """Envelope constant of ``|d_a|^beta_a |d_b|^beta_b K_t`` for each ``t``.

    Returns, per ``t``, the sup over samples of
    ``|...K_t(x)| t^((2+beta_a+beta_b)/3) <t^(-1/3) x_a>^(1/4-beta_a/2) <t^(-1/3) x_b>^(1/4-beta_b/2)``.
    The weight and the kernel are both products, so the 2D sup is the
    product of two 1D sups taken over ``|t^(-1/3) x| <= y_max``.
    """
    for beta in (beta_a, beta_b):
        if not 0.0 <= beta <= 0.5:
            raise ValueError("beta must lie in [0, 1/2]")
    y = np.arange(-y_max, y_max + dy / 2, dy)
    out = []
    for t in t_list:
        ca = _envelope_1d(t, beta_a, y)
        cb = ca if beta_b == beta_a else _envelope_1d(t, beta_b, y)
        out.append(ca * cb)
    return np.asarray(out)


@dataclass(frozen=True, eq=False)
class WeakLpReport:
    p: float
    lambda_grid: np.ndarray
    measures: np.ndarray
    quasi_norm: float
    raw_sup: float
    raw_sup_exact: float


def weak_lp_norm(samples, p: float, *, cell_measure: float | None = None, n_lambda: int = 400) -> WeakLpReport:
    """``sup_lambda lambda^p |{|g| >= lambda}|`` over a logarithmic lambda grid.

    ``samples`` is a :class:`KernelSample` (whose ``cell_measure`` is used)
    or an array of values together with ``cell_measure``.  ``raw_sup_exact``
    is the sup over all lambda, attained at sample values: with values sorted
    decreasingly ``g_1 >= g_2 >= ...`` it equals ``max_k g_k^p k cell``.
    """
    if isinstance(samples, KernelSample):
        values = samples.values
        if cell_measure is None:
            cell_measure = samples.cell_measure
    else:
        values = samples
    if cell_measure is None or not cell_measure > 0:
        raise ValueError("a positive cell measure is required")
    if not p >= 1:
        raise ValueError("p must be >= 1")
    mags = np.abs(np.asarray(values)).ravel()
    mags = np.sort(mags[mags > 0])
    if mags.size == 0:
        return WeakLpReport(p, np.zeros(0), np.zeros(0), 0.0, 0.0, 0.0)
    lo, hi = float(mags[0]), float(mags[-1])
    lam = np.geomspace(lo, hi, n_lambda) if hi > lo else np.array([hi])
    lam[0], lam[-1] = lo, hi
    counts = mags.size - np.searchsorted(mags, lam, side="left")
    measures = counts * cell_measure
    raw_sup = float(np.max(lam**p * measures))
    desc = mags[::-1]
    exact = float(np.max(desc**p * np.arange(1, desc.size + 1))) * cell_measure
    return WeakLpReport(p, lam, measures, raw_sup ** (1.0 / p), raw_sup, exact)


def kernel_weak_lp_scaling(t_list=(1.0, 8.0, 64.0), p_list=(4.0, 6.0), **sample_kw) -> list[dict]:
    """Weak-L^p quasi-norms of ``K_t`` and their scaling in ``t``.

    One row per ``(t, p)`` with the quasi-norm, the predicted ratio
    ``(t/t_0)^(-2/3+2/(3p))`` against the first time, the measured ratio and
    their relative deviation; ``exponent`` is the least-squares slope of
    ``log quasi_norm`` against ``log t`` (repeated on each row of that ``p``).
    """
    t_list = [float(t) for t in t_list]
    kernels = {t: kernel_samples_2d(t, **sample_kw) for t in t_list}
    rows = []
    for p in p_list:
        q = [weak_lp_norm(kernels[t], p).quasi_norm for t in t_list]
        slope = float(np.polyfit(np.log(t_list), np.log(q), 1)[0]) if len(t_list) > 1 else float("nan")
        predicted_exp = -2.0 / 3.0 + 2.0 / (3.0 * p)
        for t, qn in zip(t_list, q):
            pred = (t / t_list[0]) ** predicted_exp
            meas = qn / q[0]
            rows.append({
                "t": t, "p": float(p), "quasi_norm": qn, "predicted_ratio": pred,
                "measured_ratio": meas, "deviation": abs(meas / pred - 1.0),
                "exponent": slope, "predicted_exponent": predicted_exp,
            })
    return rows
