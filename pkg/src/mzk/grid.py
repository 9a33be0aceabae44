"""Periodic grid, spectral transforms and Fourier multipliers.

The box is centred at the origin, sample ``j`` along an axis sits at
``-len/2 + j*len/n``.  Spectral coefficients use the ``exp(-i k.x)``
convention and are normalised as Fourier-series coefficients::

    coeff(k) = (1/N) sum_j v(x_j) exp(-i k . x_j)

so that ``||v||_{L2}^2 = area * sum |coeff|^2``.  Coefficient arrays are
stored in FFT order (``numpy.fft.fftfreq`` layout).

The Fourier variable in the transform convention is not fixed anywhere else
in the package's references; this convention is a choice.  With it, the
linear flow of ``dv/dt + d_a^3 v + d_b^3 v = 0`` is multiplication by
``exp(+i t (k_a^3 + k_b^3))``.
"""

from __future__ import annotations

import enum
import functools
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft

TWO_THIRDS_ROOT = 2.0 ** (2.0 / 3.0)
AMPLITUDE_XY_TO_AB = 2.0**-0.5


def fft_workers() -> int:
    """Thread count handed to ``scipy.fft``; results are bit-reproducible for
    a fixed value."""
    return int(os.environ.get("MZK_FFT_WORKERS", "1"))


class Frame(str, enum.Enum):
    XY = "xy"
    AB = "ab"


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Periodic box ``[-len_a/2, len_a/2) x [-len_b/2, len_b/2)`` with
    ``n_a x n_b`` samples."""

    n_a: int
    n_b: int
    len_a: float
    len_b: float
    dealias_fraction: float = 1.0

    def __post_init__(self):
        for name in ("n_a", "n_b"):
            n = getattr(self, name)
            if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
                raise ValueError(f"{name} must be an integer, got {n!r}")
            if n < 8 or not _is_pow2(int(n)):
                raise ValueError(f"{name} must be a power of two >= 8, got {n}")
        for name in ("len_a", "len_b"):
            length = getattr(self, name)
            if not (math.isfinite(length) and length > 0):
                raise ValueError(f"{name} must be positive and finite, got {length}")
        if not (0.0 < self.dealias_fraction <= 1.0):
            raise ValueError(f"dealias_fraction must lie in (0, 1], got {self.dealias_fraction}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_a, self.n_b)

    @property
    def cell_area(self) -> float:
        return (self.len_a / self.n_a) * (self.len_b / self.n_b)

    @property
    def area(self) -> float:
        return self.len_a * self.len_b


def _signed_index(n: int) -> np.ndarray:
    return np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)


@dataclass(frozen=True, eq=False)
class Grid:
    """Precomputed coordinate and wavenumber tables for a :class:`GridSpec`.

    ``k_a_odd``/``k_b_odd`` equal ``k_a``/``k_b`` with the Nyquist entry set
    to zero; odd symbols are evaluated on them so that they map real fields
    to real fields.
    """

    spec: GridSpec
    x_a: np.ndarray
    x_b: np.ndarray
    j_a: np.ndarray
    j_b: np.ndarray
    k_a: np.ndarray
    k_b: np.ndarray
    k_a_odd: np.ndarray
    k_b_odd: np.ndarray
    sign_a: np.ndarray
    sign_b: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.spec.shape

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x_a, self.x_b, indexing="ij")

    def wavenumbers(self, *, half: bool = False, odd: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Broadcastable ``(k_a[:, None], k_b[None, :])``; ``half`` selects the
        ``rfft`` layout along ``b``."""
        ka = self.k_a_odd if odd else self.k_a
        kb = self.k_b_odd if odd else self.k_b
        if half:
            kb = np.abs(kb[: self.spec.n_b // 2 + 1])
            if odd:
                kb = kb.copy()
                kb[-1] = 0.0
        return ka[:, None], kb[None, :]

    def signs(self, *, half: bool = False) -> np.ndarray:
        sb = self.sign_b[: self.spec.n_b // 2 + 1] if half else self.sign_b
        return self.sign_a[:, None] * sb[None, :]

    def retained_mask(self, *, half: bool = False) -> np.ndarray:
        """Modes kept by the solver: Nyquist modes dropped, and only
        ``|j| < dealias_fraction * n/2`` retained."""
        key = ("mask", half)
        if key not in self._cache:
            fa = self.spec.dealias_fraction * self.spec.n_a / 2
            fb = self.spec.dealias_fraction * self.spec.n_b / 2
            ja = np.abs(self.j_a)
            jb = np.abs(self.j_b[: self.spec.n_b // 2 + 1] if half else self.j_b)
            ma = (ja < fa) & (ja != self.spec.n_a // 2)
            mb = (jb < fb) & (jb != self.spec.n_b // 2)
            self._cache[key] = ma[:, None] & mb[None, :]
        return self._cache[key]


@functools.lru_cache(maxsize=32)
def make_grid(spec: GridSpec) -> Grid:
    """Build (and cache) the coordinate/wavenumber tables for ``spec``."""
    tables = {}
    for axis, n, length in (("a", spec.n_a, spec.len_a), ("b", spec.n_b, spec.len_b)):
        j = _signed_index(n)
        k = (2.0 * math.pi / length) * j.astype(float)
        k_odd = k.copy()
        k_odd[j == -n // 2] = 0.0
        tables[f"x_{axis}"] = -0.5 * length + (length / n) * np.arange(n)
        tables[f"j_{axis}"] = j
        tables[f"k_{axis}"] = k
        tables[f"k_{axis}_odd"] = k_odd
        # exp(-i k x_0) with x_0 = -len/2 is (-1)^j
        tables[f"sign_{axis}"] = np.where(j % 2 == 0, 1.0, -1.0)
    return Grid(spec=spec, **tables)


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a field on the grid, in the ``xy`` or ``ab`` frame."""

    grid: GridSpec
    values: np.ndarray
    time: float = 0.0
    frame: Frame = Frame.AB

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite samples")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "frame", Frame(self.frame))

    def l2_norm(self) -> float:
        return math.sqrt(self.grid.cell_area * float(np.sum(self.values**2)))


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: GridSpec
    coeffs: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.shape != self.grid.shape:
            raise ValueError(f"coeffs shape {coeffs.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", coeffs)

    def l2_norm(self) -> float:
        """Normalised l2 norm; equals the L2 norm of the physical field."""
        return math.sqrt(self.grid.area * float(np.sum(np.abs(self.coeffs) ** 2)))

    def hermitian_defect(self) -> float:
        """``max |c(-k) - conj(c(k))| / max |c|`` (zero for real fields)."""
        c = self.coeffs
        flipped = np.roll(np.flip(c, axis=(0, 1)), shift=(1, 1), axis=(0, 1))
        scale = float(np.max(np.abs(c)))
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(flipped - np.conj(c)))) / scale


def forward(field: Field) -> SpectralField:
    if field.frame != Frame.AB:
        raise ValueError("forward transform is defined on ab-frame fields only")
    grid = make_grid(field.grid)
    n = field.grid.n_a * field.grid.n_b
    coeffs = sfft.fft2(field.values, workers=fft_workers()) * (grid.signs() / n)
    return SpectralField(field.grid, coeffs, field.time)


def inverse(sf: SpectralField, *, imag_tol: float = 1e-9) -> Field:
    grid = make_grid(sf.grid)
    n = sf.grid.n_a * sf.grid.n_b
    vals = sfft.ifft2(sf.coeffs * grid.signs(), workers=fft_workers()) * n
    scale = max(float(np.max(np.abs(vals))), 1e-300)
    if float(np.max(np.abs(vals.imag))) > imag_tol * scale:
        raise ValueError("coefficients are not Hermitian: inverse transform is not real")
    return Field(sf.grid, vals.real.copy(), sf.time, Frame.AB)


class MultiplierKind(str, enum.Enum):
    LINEAR_SEMIGROUP = "linear_semigroup"
    DERIVATIVE_A = "derivative_a"
    DERIVATIVE_B = "derivative_b"
    FRACTIONAL_ABS_A = "fractional_abs_a"
    FRACTIONAL_ABS_B = "fractional_abs_b"
    SUM_DERIVATIVE = "sum_derivative"
    SOBOLEV_WEIGHT = "sobolev_weight"


@dataclass(frozen=True)
class MultiplierSpec:
    """A Fourier multiplier.  ``value`` is the time for the semigroup, the
    order for derivatives, the exponent for fractional derivatives and the
    Sobolev index for ``sobolev_weight``."""

    kind: MultiplierKind
    value: float = 0.0

    def __post_init__(self):
        kind = MultiplierKind(self.kind)
        object.__setattr__(self, "kind", kind)
        v = self.value
        if not math.isfinite(v):
            raise ValueError("multiplier parameter must be finite")
        if kind in (MultiplierKind.DERIVATIVE_A, MultiplierKind.DERIVATIVE_B) and v not in (1, 2, 3):
            raise ValueError(f"derivative order must be 1, 2 or 3, got {v}")
        if kind in (MultiplierKind.FRACTIONAL_ABS_A, MultiplierKind.FRACTIONAL_ABS_B) and not 0.0 <= v <= 1.0:
            raise ValueError(f"fractional exponent must lie in [0, 1], got {v}")
        if kind is MultiplierKind.SOBOLEV_WEIGHT and not 0.0 <= v <= 3.0:
            raise ValueError(f"Sobolev index must lie in [0, 3], got {v}")

    @classmethod
    def semigroup(cls, t: float) -> "MultiplierSpec":
        return cls(MultiplierKind.LINEAR_SEMIGROUP, t)

    def symbol(self, grid: Grid, *, half: bool = False) -> np.ndarray:
        kind, v = self.kind, self.value
        ka, kb = grid.wavenumbers(half=half)
        ka_o, kb_o = grid.wavenumbers(half=half, odd=True)
        if kind is MultiplierKind.LINEAR_SEMIGROUP:
            return np.exp(1j * v * (ka_o**3 + kb_o**3))
        if kind is MultiplierKind.DERIVATIVE_A:
            k = ka_o if int(v) % 2 else ka
            return np.broadcast_to((1j * k) ** int(v), _bshape(ka, kb))
        if kind is MultiplierKind.DERIVATIVE_B:
            k = kb_o if int(v) % 2 else kb
            return np.broadcast_to((1j * k) ** int(v), _bshape(ka, kb))
        if kind is MultiplierKind.FRACTIONAL_ABS_A:
            return np.broadcast_to(np.abs(ka) ** v, _bshape(ka, kb))
        if kind is MultiplierKind.FRACTIONAL_ABS_B:
            return np.broadcast_to(np.abs(kb) ** v, _bshape(ka, kb))
        if kind is MultiplierKind.SUM_DERIVATIVE:
            return 1j * (ka_o + kb_o)
        return (1.0 + ka**2 + kb**2) ** (v / 2.0)


def _bshape(ka, kb):
    return (ka.shape[0], kb.shape[1])


def apply_multiplier(sf: SpectralField, m: MultiplierSpec) -> SpectralField:
    grid = make_grid(sf.grid)
    return SpectralField(sf.grid, sf.coeffs * m.symbol(grid), sf.time)


def ab_wavenumbers(k_x, k_y):
    """Dual of the change of variables ``(x_a, x_b) = ((x + sqrt3 y), (x - sqrt3 y)) / 2^(2/3)``."""
    k_x = np.asarray(k_x, dtype=float)
    k_y = np.asarray(k_y, dtype=float)
    s = k_y / math.sqrt(3.0)
    return (k_x + s) / (2.0 / TWO_THIRDS_ROOT), (k_x - s) / (2.0 / TWO_THIRDS_ROOT)


def dual_map_check(k_x, k_y):
    """``|k_a^3 + k_b^3 - k_x (k_x^2 + k_y^2)|``: the rotated linear symbol
    against the symbol of ``d_x (d_x^2 + d_y^2)``."""
    k_a, k_b = ab_wavenumbers(k_x, k_y)
    k_x = np.asarray(k_x, dtype=float)
    k_y = np.asarray(k_y, dtype=float)
    res = np.abs(k_a**3 + k_b**3 - k_x * (k_x**2 + k_y**2))
    return float(res) if res.ndim == 0 else res


def xy_from_ab(x_a, x_b):
    """Inverse coordinate change: physical ``(x, y)`` of a rotated point."""
    c = 2.0 ** (-1.0 / 3.0)
    return c * (x_a + x_b), c * (x_a - x_b) / math.sqrt(3.0)


def smooth_step(s):
    """C-infinity step: 1 for ``s <= 0``, 0 for ``s >= 1``."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(s < 1.0, np.exp(-1.0 / (1.0 - s)), 0.0)
        b = np.where(s > 0.0, np.exp(-1.0 / s), 0.0)
        out = a / (a + b)
    return np.where(s <= 0.0, 1.0, np.where(s >= 1.0, 0.0, out))


IC_KINDS = ("gaussian",)


@dataclass(frozen=True)
class InitialCondition:
    """``epsilon * exp(-(x^2 + y^2) / width^2) * cos(m . (x, y))`` in the
    physical frame.

    ``band_limit=(k_lo, k_hi)`` multiplies the spectrum (in the frame being
    sampled) by a smooth radial cutoff that is 1 below ``k_lo`` and 0 above
    ``k_hi``.
    """

    kind: str = "gaussian"
    epsilon: float = 0.05
    width: float = 1.0
    modulation: tuple[float, float] = (0.0, 0.0)
    band_limit: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in IC_KINDS:
            raise ValueError(f"unsupported initial-condition kind {self.kind!r}; known: {IC_KINDS}")
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError("epsilon must be finite and >= 0")
        if not (math.isfinite(self.width) and self.width > 0):
            raise ValueError("width must be positive")
        object.__setattr__(self, "modulation", tuple(float(m) for m in self.modulation))
        if self.band_limit is not None:
            lo, hi = (float(b) for b in self.band_limit)
            if not 0 <= lo < hi:
                raise ValueError("band_limit must satisfy 0 <= k_lo < k_hi")
            object.__setattr__(self, "band_limit", (lo, hi))


def evaluate_ic(ic: InitialCondition, spec: GridSpec, frame: Frame | str = Frame.AB, time: float = 0.0) -> Field:
    """Sample an initial condition directly in the requested frame.

    In the ``ab`` frame the sample at ``(x_a, x_b)`` is ``2^(-1/2) u(x, y)``
    with ``(x, y)`` the physical point; no resampling between frames.
    """
    frame = Frame(frame)
    grid = make_grid(spec)
    p, q = grid.mesh()
    if frame is Frame.AB:
        x, y = xy_from_ab(p, q)
        amp = AMPLITUDE_XY_TO_AB * ic.epsilon
    else:
        x, y = p, q
        amp = ic.epsilon
    mx, my = ic.modulation
    values = amp * np.exp(-(x**2 + y**2) / ic.width**2)
    if mx or my:
        values = values * np.cos(mx * x + my * y)
    if ic.band_limit is not None:
        lo, hi = ic.band_limit
        ka, kb = grid.wavenumbers()
        cut = smooth_step((np.sqrt(ka**2 + kb**2) - lo) / (hi - lo))
        values = sfft.ifft2(sfft.fft2(values, workers=fft_workers()) * cut, workers=fft_workers()).real
    return Field(spec, values, time, frame)


def with_time(sf: SpectralField, time: float) -> SpectralField:
    return replace(sf, time=time)
