"""Airy function Ai on the real line.

Power series (in extended precision) near the origin, Poincare asymptotic
expansions in the exponentially decaying and oscillating regimes.  Absolute
accuracy is better than 1e-10 on [-50, 50].
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

AI0 = 1.0 / (3.0 ** (2.0 / 3.0) * math.gamma(2.0 / 3.0))
AIP0 = -1.0 / (3.0 ** (1.0 / 3.0) * math.gamma(1.0 / 3.0))

# Series/asymptotic switch points.  The series loses roughly exp(2/3 |z|^1.5)
# ulps to cancellation; the asymptotic remainder is about exp(-4/3 |z|^1.5).
SERIES_MAX_POS = 5.0
SERIES_MAX_NEG = 7.5

_N_ASYMP = 40
_QUAD_NODES = 400


def _asymptotic_coeffs(n: int) -> np.ndarray:
    u = np.empty(n)
    u[0] = 1.0
    for k in range(1, n):
        u[k] = u[k - 1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216.0 * k)
    return u


_U = _asymptotic_coeffs(_N_ASYMP)


def _series(z: np.ndarray) -> np.ndarray:
    zl = z.astype(np.longdouble)
    z3 = zl**3
    f_term = np.ones_like(zl)
    g_term = zl.copy()
    f_sum = f_term.copy()
    g_sum = g_term.copy()
    for k in range(200):
        f_term = f_term * z3 / ((3 * k + 2) * (3 * k + 3))
        g_term = g_term * z3 / ((3 * k + 3) * (3 * k + 4))
        f_sum += f_term
        g_sum += g_term
        if np.all(np.abs(f_term) + np.abs(g_term) <= 1e-22 * (np.abs(f_sum) + np.abs(g_sum))):
            break
    out = np.longdouble(AI0) * f_sum + np.longdouble(AIP0) * g_sum
    return out.astype(float)


def _truncated_sum(terms: np.ndarray) -> np.ndarray:
    """Sum an asymptotic series up to (excluding) its smallest term, per column."""
    mags = np.abs(terms)
    # stop before terms start to grow again
    growing = np.diff(mags, axis=0) > 0
    stop = np.where(growing.any(axis=0), growing.argmax(axis=0) + 1, terms.shape[0])
    mask = np.arange(terms.shape[0])[:, None] < stop[None, :]
    return np.where(mask, terms, 0.0).sum(axis=0)


def _asymptotic_pos(z: np.ndarray) -> np.ndarray:
    zeta = 2.0 / 3.0 * z**1.5
    k = np.arange(_N_ASYMP)[:, None]
    terms = (-1.0) ** k * _U[:, None] / zeta[None, :] ** k
    s = _truncated_sum(terms)
    return np.exp(-zeta) / (2.0 * math.sqrt(math.pi) * z**0.25) * s


def _asymptotic_neg(x: np.ndarray) -> np.ndarray:
    """Ai(-x) for large positive x."""
    zeta = 2.0 / 3.0 * x**1.5
    half = _N_ASYMP // 2
    k = np.arange(half)[:, None]
    even = (-1.0) ** k * _U[0::2][:half, None] / zeta[None, :] ** (2 * k)
    odd = (-1.0) ** k * _U[1::2][:half, None] / zeta[None, :] ** (2 * k + 1)
    p = _truncated_sum(even)
    q = _truncated_sum(odd)
    theta = zeta + math.pi / 4.0
    return (np.sin(theta) * p - np.cos(theta) * q) / (math.sqrt(math.pi) * x**0.25)


def airy_ai(z):
    """Evaluate Ai(z) for real ``z`` (scalar or array)."""
    z_arr = np.asarray(z, dtype=float)
    flat = np.atleast_1d(z_arr).ravel()
    if not np.all(np.isfinite(flat)):
        raise ValueError("airy_ai: non-finite argument")
    out = np.empty_like(flat)
    pos = flat > SERIES_MAX_POS
    neg = flat < -SERIES_MAX_NEG
    mid = ~(pos | neg)
    if mid.any():
        out[mid] = _series(flat[mid])
    if pos.any():
        out[pos] = _asymptotic_pos(flat[pos])
    if neg.any():
        out[neg] = _asymptotic_neg(-flat[neg])
    if z_arr.ndim == 0:
        return float(out[0])
    return out.reshape(z_arr.shape)


def airy_ai_quadrature(x: float) -> float:
    """Ai(x) from its Fourier integral, with the contour rotated onto the
    steepest-descent rays arg(xi) = pi/6 and 5 pi/6.

    Independent of :func:`airy_ai`; intended as an oracle for moderate
    ``|x|`` (the rotated integrand grows like exp(|x| r / 2) for x < 0).
    """
    x = float(x)
    # exp(-r^3/3) has underflowed well before this radius
    r_max = 6.0 + 2.0 * math.sqrt(abs(x))
    nodes, weights = special.roots_legendre(_QUAD_NODES)
    r = 0.5 * r_max * (nodes + 1.0)
    w = 0.5 * r_max * weights
    out = 0.0
    for angle, sign in ((math.pi / 6.0, 1.0), (5.0 * math.pi / 6.0, -1.0)):
        rot = complex(math.cos(angle), math.sin(angle))
        vals = np.exp(-(r**3) / 3.0 + 1j * x * r * rot) * rot
        out += sign * float(np.dot(w, vals.real))
    return out / (2.0 * math.pi)
