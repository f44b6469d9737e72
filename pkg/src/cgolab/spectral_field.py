"""Periodic pseudo-spectral fields on the box [-L, L)^3.

Coefficients are normalized so that a pure exponential has a coefficient
of modulus one: ``c_k = N^{-1} sum_x f(x) exp(-i k.x)``.  The continuum
Fourier transform of a compactly supported field is ``(2L)^3 c_k``.

Every field carries a Bloch class ``theta`` in {0, 1/2}^3.  Its wave
vectors are ``k = (pi/L)(m + theta)`` with integer ``m`` in
``[-n/2, n/2)``.  Class zero is the ordinary periodic lattice; a
half-shifted class is anti-periodic along the shifted axes.  Grid samples
of a field supported inside the box are valid in every class, which is
what lets the CGO solvers work off the zero lattice point.

Derivatives follow the convention ``D = -i grad``, whose symbol is ``k``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.fft as sfft

Theta = tuple[float, float, float]
ZERO_CLASS: Theta = (0.0, 0.0, 0.0)
_AXES = (-3, -2, -1)


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of ``n`` points per axis on ``[-L, L)``."""

    n: int
    half_width: float = 1.5

    def __post_init__(self) -> None:
        n = int(self.n)
        if n < 8 or n & (n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not self.half_width > 1.0:
            raise ValueError("half_width must exceed 1 so the unit ball fits inside the box")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def volume(self) -> float:
        return (2.0 * self.half_width) ** 3

    @property
    def cell(self) -> float:
        return self.spacing**3

    @property
    def dk(self) -> float:
        """Lattice spacing in wave-vector space."""
        return np.pi / self.half_width

    def axis(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.n)

    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable coordinate arrays of shapes (n,1,1), (1,n,1), (1,1,n)."""
        a = self.axis()
        return a[:, None, None], a[None, :, None], a[None, None, :]

    def radius(self) -> np.ndarray:
        x, y, z = self.coords()
        return np.sqrt(x * x + y * y + z * z)

    def nyquist(self) -> float:
        return self.dk * self.n / 2


def _check_theta(theta) -> Theta:
    t = tuple(float(v) % 1.0 for v in theta)
    if len(t) != 3 or any(v not in (0.0, 0.5) for v in t):
        raise ValueError(f"Bloch class must have entries in {{0, 1/2}}, got {theta}")
    return t  # type: ignore[return-value]


@lru_cache(maxsize=64)
def _phases(n: int, theta: Theta) -> tuple[np.ndarray, np.ndarray]:
    """Pre-FFT twiddle on samples and post-FFT phase on coefficients."""
    j = np.arange(n)
    m = sfft.fftfreq(n, 1.0 / n)
    pre = [np.exp(-2j * np.pi * t * j / n) for t in theta]
    post = [np.exp(1j * np.pi * (m + t)) for t in theta]
    outer = lambda v: v[0][:, None, None] * v[1][None, :, None] * v[2][None, None, :]
    return outer(pre), outer(post)


@lru_cache(maxsize=64)
def _wavevectors(n: int, half_width: float, theta: Theta) -> tuple[np.ndarray, ...]:
    m = sfft.fftfreq(n, 1.0 / n)
    dk = np.pi / half_width
    kx, ky, kz = (dk * (m + t) for t in theta)
    return kx[:, None, None], ky[None, :, None], kz[None, None, :]


def wavevectors(grid: GridSpec, theta: Theta = ZERO_CLASS) -> tuple[np.ndarray, ...]:
    """Broadcastable wave-vector components in FFT order."""
    return _wavevectors(grid.n, grid.half_width, _check_theta(theta))


def wavenumber_sq(grid: GridSpec, theta: Theta = ZERO_CLASS) -> np.ndarray:
    kx, ky, kz = wavevectors(grid, theta)
    return kx * kx + ky * ky + kz * kz


def _fwd(samples: np.ndarray, n: int, theta: Theta, workers: int | None = None) -> np.ndarray:
    pre, post = _phases(n, theta)
    if theta == ZERO_CLASS:
        return sfft.fftn(samples, axes=_AXES, norm="forward", workers=workers) * post
    return sfft.fftn(samples * pre, axes=_AXES, norm="forward", workers=workers) * post


def _inv(coeffs: np.ndarray, n: int, theta: Theta, workers: int | None = None) -> np.ndarray:
    pre, post = _phases(n, theta)
    out = sfft.ifftn(coeffs * post.conj(), axes=_AXES, norm="forward", workers=workers)
    if theta == ZERO_CLASS:
        return out
    return out * pre.conj()


def forward(samples: np.ndarray, grid: GridSpec, theta: Theta = ZERO_CLASS) -> np.ndarray:
    """Array-level transform; leading axes are treated as components."""
    return _fwd(np.asarray(samples, dtype=complex), grid.n, _check_theta(theta))


def inverse(coeffs: np.ndarray, grid: GridSpec, theta: Theta = ZERO_CLASS) -> np.ndarray:
    return _inv(np.asarray(coeffs, dtype=complex), grid.n, _check_theta(theta))


@dataclass(frozen=True)
class ScalarField:
    """Complex samples on the grid, optionally with leading component axes."""

    grid: GridSpec
    samples: np.ndarray
    theta: Theta = ZERO_CLASS

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=complex)
        if arr.shape[-3:] != self.grid.shape:
            raise ValueError(f"sample shape {arr.shape} does not match grid {self.grid.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "theta", _check_theta(self.theta))

    @property
    def components(self) -> int:
        return int(np.prod(self.samples.shape[:-3], dtype=int))


@dataclass(frozen=True)
class SpectrumField:
    """Normalized Fourier coefficients in FFT order for one Bloch class."""

    grid: GridSpec
    coeffs: np.ndarray
    theta: Theta = ZERO_CLASS

    def __post_init__(self) -> None:
        arr = np.asarray(self.coeffs, dtype=complex)
        if arr.shape[-3:] != self.grid.shape:
            raise ValueError(f"coefficient shape {arr.shape} does not match grid {self.grid.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "coeffs", arr)
        object.__setattr__(self, "theta", _check_theta(self.theta))

    def wavevectors(self) -> tuple[np.ndarray, ...]:
        return wavevectors(self.grid, self.theta)


def transform(f: ScalarField) -> SpectrumField:
    return SpectrumField(f.grid, _fwd(f.samples, f.grid.n, f.theta), f.theta)


def inverse_transform(F: SpectrumField) -> ScalarField:
    return ScalarField(F.grid, _inv(F.coeffs, F.grid.n, F.theta), F.theta)


def apply_D(F: SpectrumField, axis: int) -> SpectrumField:
    """Apply ``D_axis = -i d/dx_axis`` (axis is 1, 2 or 3)."""
    if axis not in (1, 2, 3):
        raise ValueError("axis must be 1, 2 or 3")
    k = F.wavevectors()[axis - 1]
    return SpectrumField(F.grid, F.coeffs * k, F.theta)


def sobolev_weight(grid: GridSpec, s: float, theta: Theta = ZERO_CLASS) -> np.ndarray:
    return (1.0 + wavenumber_sq(grid, theta)) ** s


def sobolev_norm(F: SpectrumField, s: float) -> float:
    """Discrete H^s norm; with s = 0 this is the L2 norm over the box."""
    w = sobolev_weight(F.grid, s, F.theta)
    mass = np.sum(w * np.abs(F.coeffs) ** 2)
    return float(np.sqrt(F.grid.volume * mass))


def low_pass(F: SpectrumField, T: float) -> SpectrumField:
    if not T > 0:
        raise ValueError("T must be positive")
    keep = wavenumber_sq(F.grid, F.theta) <= T * T
    return SpectrumField(F.grid, np.where(keep, F.coeffs, 0.0), F.theta)


def synth_bump(grid: GridSpec, center, radius: float, amplitude: float) -> ScalarField:
    """Smooth bump ``a exp(1 - 1/(1 - r^2/rho^2))`` supported in a ball inside B."""
    c = np.asarray(center, dtype=float)
    if c.shape != (3,) or radius <= 0:
        raise ValueError("center must be a 3-vector and radius positive")
    if np.linalg.norm(c) + radius > 1.0:
        raise ValueError("bump support must lie inside the unit ball")
    x, y, z = grid.coords()
    t = ((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2) / radius**2
    inside = t < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        vals = np.where(inside, np.exp(1.0 - 1.0 / np.where(inside, 1.0 - t, 1.0)), 0.0)
    return ScalarField(grid, amplitude * vals)


def bump_with_norm(grid: GridSpec, center, radius: float, norm: float, s: float) -> ScalarField:
    """``synth_bump`` rescaled so that its H^s norm equals ``norm``."""
    unit = synth_bump(grid, center, radius, 1.0)
    scale = norm / sobolev_norm(transform(unit), s)
    return ScalarField(grid, unit.samples * scale)


# -- dealiased products -------------------------------------------------------


def _embed(coeffs: np.ndarray, m_big: int) -> np.ndarray:
    n = coeffs.shape[-1]
    out = np.zeros(coeffs.shape[:-3] + (m_big,) * 3, dtype=complex)
    lo, hi = n // 2, m_big - n // 2
    idx = np.r_[0:lo, hi:m_big]
    out[..., idx[:, None, None], idx[None, :, None], idx[None, None, :]] = coeffs
    return out


def _extract(coeffs: np.ndarray, n: int) -> np.ndarray:
    m_big = coeffs.shape[-1]
    idx = np.r_[0 : n // 2, m_big - n // 2 : m_big]
    return coeffs[..., idx[:, None, None], idx[None, :, None], idx[None, None, :]]


def product_class(a: Theta, b: Theta) -> Theta:
    return tuple((x + y) % 1.0 for x, y in zip(a, b))  # type: ignore[return-value]


def dealiased_product(a: SpectrumField, b: SpectrumField) -> SpectrumField:
    """Spectrum of the pointwise product by 3/2 zero padding.

    Exact (up to round-off) for the retained modes when both inputs are
    band-limited to the grid.
    """
    if a.grid != b.grid:
        raise ValueError("grid mismatch")
    n = a.grid.n
    m_big = 3 * n // 2
    fa = _inv(_embed(a.coeffs, m_big), m_big, a.theta)
    fb = _inv(_embed(b.coeffs, m_big), m_big, b.theta)
    theta = product_class(a.theta, b.theta)
    return SpectrumField(a.grid, _extract(_fwd(fa * fb, m_big, theta), n), theta)


def recast(F: SpectrumField, theta: Theta) -> SpectrumField:
    """Re-expand the same grid samples in another Bloch class."""
    theta = _check_theta(theta)
    if theta == F.theta:
        return F
    return transform(ScalarField(F.grid, inverse_transform(F).samples, theta))


def mode_index(grid: GridSpec, k, theta: Theta = ZERO_CLASS) -> tuple[int, int, int]:
    """FFT-order index of the lattice wave vector ``k``."""
    m = np.asarray(k, dtype=float) / grid.dk - np.asarray(_check_theta(theta))
    mi = np.rint(m).astype(int)
    if np.max(np.abs(m - mi)) > 1e-9:
        raise ValueError(f"{k} is not on the lattice")
    if np.any(mi < -grid.n // 2) or np.any(mi >= grid.n // 2):
        raise ValueError(f"{k} lies outside the grid band")
    return tuple(int(v) % grid.n for v in mi)  # type: ignore[return-value]


def lattice_modes(grid: GridSpec, T: float) -> np.ndarray:
    """Integer class-zero wave-vector indices with |k| <= T, in a fixed order."""
    half = grid.n // 2
    r = np.arange(-half, half)
    m = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    k2 = (grid.dk**2) * np.sum(m * m, axis=1)
    sel = m[k2 <= T * T + 1e-12]
    order = np.lexsort((sel[:, 2], sel[:, 1], sel[:, 0], np.sum(sel * sel, axis=1)))
    return sel[order]


# -- flat binary container ----------------------------------------------------

_HEADER = struct.Struct("<IdI")
_LAYOUT = struct.Struct("<II")


def save_field(path: str | Path, grid: GridSpec, samples: np.ndarray, layout: tuple[int, int] | None = None) -> None:
    """Write ``{n, L, components}`` then little-endian complex64 samples.

    Matrix fields pass ``layout=(rows, cols)``; their component count is
    ``rows*cols`` and the layout follows the main header.
    """
    arr = np.asarray(samples)
    comps = int(np.prod(arr.shape[:-3], dtype=int))
    if layout is not None and layout[0] * layout[1] != comps:
        raise ValueError("layout does not match component count")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(grid.n, grid.half_width, comps))
        if layout is not None:
            fh.write(_LAYOUT.pack(*layout))
        fh.write(np.ascontiguousarray(arr, dtype="<c8").tobytes())


def load_field(path: str | Path, matrix: bool = False) -> tuple[GridSpec, np.ndarray]:
    raw = Path(path).read_bytes()
    n, half_width, comps = _HEADER.unpack_from(raw, 0)
    off = _HEADER.size
    shape: tuple[int, ...] = (comps,)
    if matrix:
        shape = _LAYOUT.unpack_from(raw, off)
        off += _LAYOUT.size
    grid = GridSpec(n, half_width)
    data = np.frombuffer(raw, dtype="<c8", offset=off).reshape(shape + grid.shape)
    if not matrix and comps == 1:
        data = data[0]
    return grid, data
