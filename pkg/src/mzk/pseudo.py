"""Half-spectrum (real FFT) operators used by the time stepper and norms.

Arrays here are raw ``scipy.fft.rfft2`` outputs of the physical samples, without
the normalisation or centring phase of :mod:`mzk.grid`; diagonal multipliers
do not care, and conversion happens only at the boundaries.
"""

from __future__ import annotations

import functools

import numpy as np
import scipy.fft as sfft

from .grid import GridSpec, MultiplierSpec, fft_workers, make_grid

PAD = 2


class Pseudospectral:
    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.grid = make_grid(spec)
        na, nb = spec.shape
        self.half_shape = (na, nb // 2 + 1)
        self.pad_shape = (PAD * na, PAD * nb)
        self.mask = self.grid.retained_mask(half=True)
        ka, kb = self.grid.wavenumbers(half=True, odd=True)
        self.omega = ka**3 + kb**3
        self.dsum = (1j * (ka + kb)) * self.mask
        self._pad_rows = (slice(0, na // 2), slice(na // 2 + 1, na))
        self._pad_rows_big = (slice(0, na // 2), slice(PAD * na - na // 2 + 1, PAD * na))
        self._cols = slice(0, nb // 2)
        self._scale = float(PAD * PAD)

    def to_half(self, values: np.ndarray) -> np.ndarray:
        return sfft.rfft2(values, workers=fft_workers())

    def to_physical(self, h: np.ndarray) -> np.ndarray:
        return sfft.irfft2(h, s=self.spec.shape, workers=fft_workers())

    def project(self, h: np.ndarray) -> np.ndarray:
        return h * self.mask

    def semigroup(self, t: float) -> np.ndarray:
        return np.exp(1j * t * self.omega)

    def pad(self, h: np.ndarray) -> np.ndarray:
        """Zero-pad a (Nyquist-free) half spectrum onto the 2x grid."""
        big = np.zeros((self.pad_shape[0], self.pad_shape[1] // 2 + 1), dtype=complex)
        for small_r, big_r in zip(self._pad_rows, self._pad_rows_big):
            big[big_r, self._cols] = h[small_r, self._cols]
        return big * self._scale

    def truncate(self, big: np.ndarray) -> np.ndarray:
        h = np.zeros(self.half_shape, dtype=complex)
        for small_r, big_r in zip(self._pad_rows, self._pad_rows_big):
            h[small_r, self._cols] = big[big_r, self._cols]
        return h / self._scale

    def padded_physical(self, h: np.ndarray) -> np.ndarray:
        """Samples on the 2x refined grid of the trigonometric interpolant."""
        return sfft.irfft2(self.pad(h), s=self.pad_shape, workers=fft_workers())

    def cube(self, h: np.ndarray) -> tuple[np.ndarray, float]:
        """Alias-free half spectrum of ``v^3`` on the retained modes, and
        ``max |v|`` on the refined grid."""
        vp = self.padded_physical(h)
        vmax = float(np.max(np.abs(vp)))
        c = sfft.rfft2(vp * vp * vp, workers=fft_workers())
        return self.truncate(c) * self.mask, vmax

    def rhs(self, h: np.ndarray) -> tuple[np.ndarray, float]:
        """``-(d_a + d_b)(v^3)`` and ``max |v|``."""
        c, vmax = self.cube(h)
        return -self.dsum * c, vmax

    def multiplier(self, m: MultiplierSpec) -> np.ndarray:
        return m.symbol(self.grid, half=True)

    @property
    def k_max(self) -> float:
        """``max |k_a| + max |k_b|`` over retained modes: the largest symbol
        of ``d_a + d_b``."""
        return float(np.max(np.abs(self.dsum)))


@functools.lru_cache(maxsize=16)
def pseudospectral(spec: GridSpec) -> Pseudospectral:
    return Pseudospectral(spec)
