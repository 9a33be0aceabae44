"""Interaction phase of the cubic term and its resonant sets.

For output frequency ``xi`` and input frequencies ``eta, sigma, rho`` with
``rho = xi - eta - sigma`` the phase is::

    phi = xi_a^3 + xi_b^3 - eta_a^3 - eta_b^3 - sigma_a^3 - sigma_b^3 - rho_a^3 - rho_b^3

Tolerances are relative to ``scale = |omega|``, the Euclidean norm of the
8-vector ``(xi, eta, sigma, rho)``: gradients are compared with
``tol * scale^2`` and the phase with ``tol * scale^3``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PhasePoint",
    "ResonanceRecord",
    "CutoffSample",
    "IdentityResidual",
    "SIGN_PATTERNS",
    "phase",
    "phase_array",
    "phase_gradients",
    "gradient_arrays",
    "classify",
    "space_time_predicate",
    "space_resonant_point",
    "resonance_scan",
    "m_gradxi_vanishing",
    "singular_identity_residual",
    "identity_check",
    "chi0",
    "cutoff_chi",
    "cutoff_values",
    "sampled_symbol_norm",
    "block_sample_grid",
    "cutoff_symbol",
    "singular_cutoff_symbol",
    "cutoff_scaling",
    "gradient_fd_check",
]

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class PhasePoint:
    xi: tuple[float, float]
    eta: tuple[float, float]
    sigma: tuple[float, float]

    def __post_init__(self):
        for name in ("xi", "eta", "sigma"):
            v = tuple(float(c) for c in getattr(self, name))
            if len(v) != 2:
                raise ValueError(f"{name} must have two components")
            object.__setattr__(self, name, v)

    @property
    def rho(self) -> tuple[float, float]:
        return tuple(x - e - s for x, e, s in zip(self.xi, self.eta, self.sigma))

    @property
    def omega(self) -> np.ndarray:
        return np.array([*self.xi, *self.eta, *self.sigma, *self.rho])

    @property
    def omega_a(self) -> np.ndarray:
        return np.array([self.xi[0], self.eta[0], self.sigma[0], self.rho[0]])

    @property
    def omega_b(self) -> np.ndarray:
        return np.array([self.xi[1], self.eta[1], self.sigma[1], self.rho[1]])

    @property
    def scale(self) -> float:
        return float(np.linalg.norm(self.omega))

    def scaled(self, lam: float) -> "PhasePoint":
        return PhasePoint(tuple(lam * c for c in self.xi), tuple(lam * c for c in self.eta),
                          tuple(lam * c for c in self.sigma))


def phase_array(xi_a, xi_b, eta_a, eta_b, sigma_a, sigma_b):
    """Vectorised phase."""
    rho_a = xi_a - eta_a - sigma_a
    rho_b = xi_b - eta_b - sigma_b
    return xi_a**3 + xi_b**3 - eta_a**3 - eta_b**3 - sigma_a**3 - sigma_b**3 - rho_a**3 - rho_b**3


def phase(p: PhasePoint) -> float:
    return float(phase_array(p.xi[0], p.xi[1], p.eta[0], p.eta[1], p.sigma[0], p.sigma[1]))


def gradient_arrays(xi_a, xi_b, eta_a, eta_b, sigma_a, sigma_b):
    """``(d phi/d eta_a, d eta_b, d sigma_a, d sigma_b, d xi_a, d xi_b)`` with
    ``eta, sigma, xi`` independent (``rho`` eliminated)."""
    rho_a = xi_a - eta_a - sigma_a
    rho_b = xi_b - eta_b - sigma_b
    return (
        3.0 * (rho_a**2 - eta_a**2), 3.0 * (rho_b**2 - eta_b**2),
        3.0 * (rho_a**2 - sigma_a**2), 3.0 * (rho_b**2 - sigma_b**2),
        3.0 * (xi_a**2 - rho_a**2), 3.0 * (xi_b**2 - rho_b**2),
    )


def phase_gradients(p: PhasePoint):
    """``(grad_eta, grad_sigma, grad_xi)``, each a pair of floats."""
    g = gradient_arrays(p.xi[0], p.xi[1], p.eta[0], p.eta[1], p.sigma[0], p.sigma[1])
    return (float(g[0]), float(g[1])), (float(g[2]), float(g[3])), (float(g[4]), float(g[5]))


@dataclass(frozen=True)
class ResonanceRecord:
    point: PhasePoint
    phi: float
    grad_eta: tuple[float, float]
    grad_sigma: tuple[float, float]
    grad_xi: tuple[float, float]
    dxi_a_phi: float
    flags: frozenset
    sign_pattern: tuple[int, int, int, int] | None
    scale: float
    tol: float

    @property
    def m_gradxi(self) -> float:
        """``|(xi_a + xi_b) grad_xi phi|``."""
        return abs(self.point.xi[0] + self.point.xi[1]) * math.hypot(*self.grad_xi)


def _sign(value: float, ref: float, zero_tol: float) -> int:
    if abs(ref) <= zero_tol:
        return 1
    return 1 if value * ref >= 0 else -1


def classify(p: PhasePoint, tol: float = DEFAULT_TOL) -> ResonanceRecord:
    """Space / time / space-time flags of a point.

    ``sign_pattern = (eps1_a, eps2_a, eps1_b, eps2_b)`` with
    ``eta_c = eps1_c rho_c`` and ``sigma_c = eps2_c rho_c``; it is set for
    space-resonant points with some nonzero ``rho`` component, and a block
    whose ``rho`` component vanishes gets ``+1`` signs.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    phi = phase(p)
    g_eta, g_sig, g_xi = phase_gradients(p)
    scale = p.scale
    flags = set()
    if max(math.hypot(*g_eta), math.hypot(*g_sig)) <= tol * scale**2:
        flags.add("space")
    if abs(phi) <= tol * scale**3:
        flags.add("time")
    if {"space", "time"} <= flags:
        flags.add("space_time")
    pattern = None
    rho = p.rho
    zero_tol = tol * scale
    if "space" in flags and any(abs(r) > zero_tol for r in rho):
        pattern = (
            _sign(p.eta[0], rho[0], zero_tol), _sign(p.sigma[0], rho[0], zero_tol),
            _sign(p.eta[1], rho[1], zero_tol), _sign(p.sigma[1], rho[1], zero_tol),
        )
    return ResonanceRecord(p, phi, g_eta, g_sig, g_xi, g_xi[0], frozenset(flags), pattern, scale, tol)


def space_time_predicate(record: ResonanceRecord) -> bool:
    """Characterisation of space-time resonances among space resonances.

    True iff (some a-sign is -1 or rho_a = 0) and (some b-sign is -1 or
    rho_b = 0), or all signs are +1 and rho_a + rho_b = 0.
    """
    if "space" not in record.flags:
        raise ValueError("predicate applies to space-resonant records only")
    zero_tol = record.tol * record.scale
    rho_a, rho_b = record.point.rho
    za, zb = abs(rho_a) <= zero_tol, abs(rho_b) <= zero_tol
    if record.sign_pattern is None:
        return za and zb
    e1a, e2a, e1b, e2b = record.sign_pattern
    first = (e1a == -1 or e2a == -1 or za) and (e1b == -1 or e2b == -1 or zb)
    second = all(e == 1 for e in record.sign_pattern) and abs(rho_a + rho_b) <= zero_tol
    return bool(first or second)


SIGN_PATTERNS = tuple(itertools.product((1, -1), repeat=4))


def space_resonant_point(rho: tuple[float, float], signs: tuple[int, int, int, int]) -> PhasePoint:
    """Point with ``eta_c = eps1_c rho_c``, ``sigma_c = eps2_c rho_c`` and
    ``xi = eta + sigma + rho``."""
    e1a, e2a, e1b, e2b = signs
    eta = (e1a * rho[0], e1b * rho[1])
    sigma = (e2a * rho[0], e2b * rho[1])
    xi = (eta[0] + sigma[0] + rho[0], eta[1] + sigma[1] + rho[1])
    return PhasePoint(xi, eta, sigma)


def m_gradxi_vanishing(records) -> float:
    """Max over space-time-resonant records of ``|(xi_a + xi_b) grad_xi phi| / scale^4``
    (zero if there are none)."""
    worst = 0.0
    for r in records:
        if "space_time" in r.flags and r.scale > 0:
            worst = max(worst, r.m_gradxi / r.scale**4)
    return worst


DEFAULT_RHO_GRID = (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0)


def resonance_scan(rho_grid=DEFAULT_RHO_GRID, tol: float = DEFAULT_TOL, *, n_random: int = 10000,
                   seed: int = 0) -> dict:
    """Exhaustive check of the space-time resonance characterisation.

    Every ``(rho_a, rho_b)`` in ``rho_grid^2`` is combined with all 16 sign
    patterns into a space-resonant point; the time flag from :func:`classify`
    is compared with :func:`space_time_predicate`.  A random scan then perturbs
    resonant points off the manifold (``eta_a`` or ``sigma_b`` scaled by
    ``1 + delta``, ``1e-4 <= |delta| <= 1e-1``) and counts any that are still
    flagged space-resonant.
    """
    records = []
    n_constructed_not_space = 0
    mismatches = []
    for rho_a in rho_grid:
        for rho_b in rho_grid:
            for signs in SIGN_PATTERNS:
                rec = classify(space_resonant_point((rho_a, rho_b), signs), tol)
                records.append(rec)
                if "space" not in rec.flags:
                    n_constructed_not_space += 1
                    continue
                if ("time" in rec.flags) != space_time_predicate(rec):
                    mismatches.append((rho_a, rho_b, signs))
    rng = np.random.default_rng(seed)
    n_false_space = 0
    for _ in range(n_random):
        rho = rng.uniform(-5, 5, size=2)
        signs = SIGN_PATTERNS[rng.integers(16)]
        base = space_resonant_point(tuple(rho), signs)
        # move |eta_a| (or |sigma_b|) away from |rho_a| (|rho_b|) by delta * scale, keeping rho fixed
        off = 10.0 ** rng.uniform(-4, -1) * base.scale
        eta, sigma = list(base.eta), list(base.sigma)
        if rng.random() < 0.5:
            eta[0] = math.copysign(abs(rho[0]) + off, eta[0] if eta[0] else 1.0)
        else:
            sigma[1] = math.copysign(abs(rho[1]) + off, sigma[1] if sigma[1] else 1.0)
        xi = (eta[0] + sigma[0] + rho[0], eta[1] + sigma[1] + rho[1])
        if "space" in classify(PhasePoint(xi, tuple(eta), tuple(sigma)), tol).flags:
            n_false_space += 1
    return {
        "n_points": len(records),
        "n_space": sum("space" in r.flags for r in records),
        "n_time": sum("time" in r.flags for r in records),
        "n_space_time": sum("space_time" in r.flags for r in records),
        "n_predicate_mismatches": len(mismatches),
        "n_constructed_not_space": n_constructed_not_space,
        "max_m_gradxi_on_resonances": m_gradxi_vanishing(records),
        "n_off_manifold": n_random,
        "n_off_manifold_flagged_space": n_false_space,
        "mismatches": mismatches,
        "tol": tol,
    }


# --- singular identities ------------------------------------------------------

@dataclass(frozen=True)
class IdentityResidual:
    """Residuals of ``x(y+z) = c1 y(x-z) + c2 z(x-y) + c3 xyz`` for the triples
    ``(1, 1, 2/x)``, ``(1, -1, 2/y)``, ``(-1, 1, 2/z)``; ``None`` where the
    triple's denominator vanishes."""

    residuals: tuple[float | None, float | None, float | None]
    skipped: tuple[int, ...]
    bound_scale: float


def singular_identity_residual(x: float, y: float, z: float) -> IdentityResidual:
    lhs = x * (y + z)
    out, skipped = [], []
    for idx, (c1, c2, den) in enumerate(((1.0, 1.0, x), (1.0, -1.0, y), (-1.0, 1.0, z))):
        if den == 0.0:
            out.append(None)
            skipped.append(idx)
            continue
        c3 = 2.0 / den
        rhs = c1 * y * (x - z) + c2 * z * (x - y) + c3 * (x * y * z)
        out.append(abs(lhs - rhs))
    return IdentityResidual(tuple(out), tuple(skipped), (abs(x) + abs(y) + abs(z)) ** 2)


def identity_check(n: int = 10000, *, seed: int = 0, bound: float = 10.0, min_denominator: float = 1e-3) -> dict:
    """Random-input check of the three singular identities.

    Inputs are uniform in ``[-bound, bound]^3`` with every coordinate at least
    ``min_denominator`` away from 0.  Residuals are reported relative to
    ``(|x|+|y|+|z|)^2``.
    """
    rng = np.random.default_rng(seed)
    mags = rng.uniform(min_denominator, bound, size=(n, 3))
    pts = mags * rng.choice((-1.0, 1.0), size=(n, 3))
    worst = [0.0, 0.0, 0.0]
    n_skipped = 0
    for x, y, z in pts:
        r = singular_identity_residual(float(x), float(y), float(z))
        n_skipped += len(r.skipped)
        for i, v in enumerate(r.residuals):
            if v is not None:
                worst[i] = max(worst[i], v / r.bound_scale)
    return {"n_points": n, "n_skipped": n_skipped, "max_relative_residual": worst,
            "triples": ["(1, 1, 2/x)", "(1, -1, 2/y)", "(-1, 1, 2/z)"]}


# --- time-dependent cutoff -----------------------------------------------------

def chi0(r):
    """C^2 bump: 1 on ``|r| <= 1``, 0 on ``|r| >= 2``, quintic smoothstep between."""
    x = np.clip(np.abs(np.asarray(r, dtype=float)) - 1.0, 0.0, 1.0)
    return 1.0 - x**3 * (10.0 - 15.0 * x + 6.0 * x**2)


@dataclass(frozen=True)
class CutoffSample:
    s: float
    value: float
    ratio: float


def cutoff_chi(s: float, p: PhasePoint) -> CutoffSample:
    """``chi(s) = chi0(s^(1/4) |omega_a| / |omega_b|)``."""
    if not s > 0:
        raise ValueError("s must be positive")
    nb = float(np.linalg.norm(p.omega_b))
    if nb == 0.0:
        raise ValueError("cutoff undefined where omega_b = 0")
    ratio = float(np.linalg.norm(p.omega_a)) / nb
    return CutoffSample(float(s), float(chi0(s**0.25 * ratio)), ratio)


def _omega_norm(block: np.ndarray) -> np.ndarray:
    """``|(xi, eta, sigma, xi - eta - sigma)|`` for blocks ``(..., 3)``."""
    rho = block[..., 0] - block[..., 1] - block[..., 2]
    return np.sqrt(np.sum(block**2, axis=-1) + rho**2)


def cutoff_values(s: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorised ``chi(s)`` on blocks ``a = (xi_a, eta_a, sigma_a)``, ``b`` likewise."""
    return chi0(s**0.25 * _omega_norm(a) / _omega_norm(b))


def cutoff_symbol(s: float):
    return lambda a, b: cutoff_values(s, a, b)


def singular_cutoff_symbol(s: float):
    """``|omega_b|^(-2) d_{xi_a} phi chi(s)`` with ``d_{xi_a} phi = 3(xi_a^2 - rho_a^2)``."""

    def sym(a, b):
        rho_a = a[..., 0] - a[..., 1] - a[..., 2]
        return 3.0 * (a[..., 0] ** 2 - rho_a**2) / _omega_norm(b) ** 2 * cutoff_values(s, a, b)

    return sym


def _multi_indices(max_order: int):
    out = [()]
    for order in range(1, max_order + 1):
        out.extend(itertools.combinations_with_replacement(range(6), order))
    return out


def sampled_symbol_norm(symbol, max_order: int, samples: np.ndarray, *, rel_step: float = 1e-3) -> float:
    """Finite-order sampled surrogate of the bi-parameter symbol norm.

    ``samples`` has shape ``(N, 6)`` with columns
    ``(xi_a, eta_a, sigma_a, xi_b, eta_b, sigma_b)``; ``symbol(a, b)`` takes
    the two ``(..., 3)`` blocks.  Returns the max over samples and
    multi-indices of total order ``<= max_order`` of
    ``|a|^{|alpha|} |b|^{|beta|} |d^alpha_a d^beta_b symbol|``, with derivatives
    from central differences whose step in each block is ``rel_step`` times
    that block's norm.
    """
    if max_order not in (0, 1, 2):
        raise ValueError("max_order must be 0, 1 or 2")
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[1] != 6:
        raise ValueError("samples must have shape (N, 6)")
    na = np.linalg.norm(x[:, :3], axis=1)
    nb = np.linalg.norm(x[:, 3:], axis=1)
    norms = np.stack([na, na, na, nb, nb, nb], axis=1)
    steps = rel_step * norms

    def f(y):
        return np.asarray(symbol(y[:, :3], y[:, 3:]), dtype=float)

    def shifted(*moves):
        y = x.copy()
        for i, sgn in moves:
            y[:, i] += sgn * steps[:, i]
        return f(y)

    f0 = f(x)
    best = float(np.max(np.abs(f0)))
    for idx in _multi_indices(max_order)[1:]:
        with np.errstate(divide="ignore", invalid="ignore"):
            if len(idx) == 1:
                (i,) = idx
                d = (shifted((i, 1)) - shifted((i, -1))) / (2 * steps[:, i])
            elif idx[0] == idx[1]:
                i = idx[0]
                d = (shifted((i, 1)) - 2 * f0 + shifted((i, -1))) / steps[:, i] ** 2
            else:
                i, j = idx
                d = (shifted((i, 1), (j, 1)) - shifted((i, 1), (j, -1)) - shifted((i, -1), (j, 1))
                     + shifted((i, -1), (j, -1))) / (4 * steps[:, i] * steps[:, j])
        weight = np.prod([norms[:, k] for k in idx], axis=0)
        val = np.where(weight > 0, weight * np.abs(d), 0.0)
        best = max(best, float(np.max(val)))
    return best


def block_sample_grid(radii, *, n_dir_a: int = 24, n_dir_b: int = 8, seed: int = 0) -> np.ndarray:
    """Samples with random unit directions in each block, ``|b| = 1`` and
    ``|a|`` running over ``radii``."""
    rng = np.random.default_rng(seed)
    ua = rng.normal(size=(n_dir_a, 3))
    ua /= np.linalg.norm(ua, axis=1, keepdims=True)
    ub = rng.normal(size=(n_dir_b, 3))
    ub /= np.linalg.norm(ub, axis=1, keepdims=True)
    r = np.asarray(radii, dtype=float)
    a = (r[:, None, None, None] * ua[None, :, None, :]) * np.ones((1, 1, n_dir_b, 1))
    b = np.broadcast_to(ub[None, None, :, :], a.shape)
    return np.concatenate([a, b], axis=-1).reshape(-1, 6)


def cutoff_scaling(s_values=(1.0, 16.0, 256.0), *, radii=None, n_dir_a: int = 24, n_dir_b: int = 8,
                   seed: int = 0, max_order: int = 2) -> dict:
    """Time-scaling of the sampled norms of ``chi(s)`` and of the singular
    cutoff symbol.

    ``chi_norms_matched`` evaluates ``chi(s)`` on the base grid with the
    a-block rescaled by ``s^(-1/4)``, where the invariance is exact.
    ``singular_norms`` uses one fixed grid for all ``s``; ``fitted_exponent``
    is the log-log slope of those norms against ``s``.
    """
    if radii is None:
        radii = np.geomspace(1e-3, 10.0, 121)
    base = block_sample_grid(radii, n_dir_a=n_dir_a, n_dir_b=n_dir_b, seed=seed)
    chi_base = sampled_symbol_norm(cutoff_symbol(1.0), max_order, base)
    chi_matched = []
    for s in s_values:
        g = base.copy()
        g[:, :3] *= s ** -0.25
        chi_matched.append(sampled_symbol_norm(cutoff_symbol(s), max_order, g))
    sing = [sampled_symbol_norm(singular_cutoff_symbol(s), max_order, base) for s in s_values]
    slope = float(np.polyfit(np.log(s_values), np.log(sing), 1)[0])
    normalised = [n * math.sqrt(s) for n, s in zip(sing, s_values)]
    mean = float(np.mean(normalised))
    return {
        "s": list(map(float, s_values)),
        "chi_norm_base": chi_base,
        "chi_norms_matched": chi_matched,
        "chi_max_deviation": max(abs(c - chi_base) for c in chi_matched),
        "singular_norms": sing,
        "fitted_exponent": slope,
        "exponent_relative_error": abs(slope + 0.5) / 0.5,
        "normalised_singular_norms": normalised,
        "normalised_max_deviation": max(abs(n / mean - 1.0) for n in normalised),
    }


def gradient_fd_check(n: int = 10000, *, seed: int = 0, box: float = 5.0, rel_step: float = 1e-4) -> dict:
    """Closed-form phase gradients against central differences of the phase.

    Points are uniform in ``[-box, box]^6``; the step is ``rel_step * scale``
    and the error is ``|fd - exact| / |exact|`` over the 6-vector of partial
    derivatives in ``(xi_a, xi_b, eta_a, eta_b, sigma_a, sigma_b)``.  Central
    differences of a cubic are exact up to rounding.
    """
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-box, box, size=(n, 6))
    g = gradient_arrays(*pts.T)
    exact = np.stack([g[4], g[5], g[0], g[1], g[2], g[3]], axis=1)
    rho = np.stack([pts[:, 0] - pts[:, 2] - pts[:, 4], pts[:, 1] - pts[:, 3] - pts[:, 5]], axis=1)
    scale = np.sqrt(np.sum(pts**2, axis=1) + np.sum(rho**2, axis=1))
    h = rel_step * scale
    fd = np.empty_like(exact)
    for i in range(6):
        up, dn = pts.copy(), pts.copy()
        up[:, i] += h
        dn[:, i] -= h
        fd[:, i] = (phase_array(*up.T) - phase_array(*dn.T)) / (2 * h)
    err = np.linalg.norm(fd - exact, axis=1) / np.linalg.norm(exact, axis=1)
    return {"n_points": n, "max_relative_error": float(np.max(err)), "median_relative_error": float(np.median(err))}
