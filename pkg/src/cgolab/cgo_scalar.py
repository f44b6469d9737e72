"""Scalar CGO solutions ``u = exp(i zeta.x)(1 + psi)``.

The remainder solves ``(-Lap - 2i zeta.grad) psi = -q(1 + psi)``.  The
conjugated operator is inverted by dividing Fourier coefficients by its
symbol ``p(k) = |k|^2 + 2 zeta.k``.  On the ordinary periodic lattice the
zero mode always lies on the zero set of ``p``, so the solver works in
the half-shifted Bloch class that keeps ``|Im zeta.k|`` furthest from zero.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractionError, DivergenceError, PreconditionError, ResonanceError
from .spectral_field import (
    GridSpec,
    ScalarField,
    SpectrumField,
    Theta,
    forward,
    inverse,
    sobolev_norm,
    wavevectors,
)

SHIFTS: tuple[Theta, ...] = tuple(
    t for t in itertools.product((0.0, 0.5), repeat=3) if any(t)
)  # type: ignore[assignment]


@dataclass(frozen=True)
class Frame:
    e1: np.ndarray
    e2: np.ndarray
    xi_dir: np.ndarray
    degenerate: bool = False


def build_frame(xi) -> Frame:
    """Orthonormal pair perpendicular to ``xi``, chosen deterministically."""
    xi = np.asarray(xi, dtype=float)
    nxi = np.linalg.norm(xi)
    if nxi == 0.0:
        return Frame(np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]), True)
    d = xi / nxi
    e1 = np.array([-d[1], d[0], 0.0])
    if np.linalg.norm(e1) < 1e-12:
        e1 = np.array([0.0, 1.0, 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(d, e1)
    e2 /= np.linalg.norm(e2)
    return Frame(e1, e2, d)


@dataclass(frozen=True)
class ZetaPair:
    zeta1: np.ndarray
    zeta2: np.ndarray
    xi: np.ndarray
    omega: float
    R: float
    kind: str
    frame: Frame
    b1: np.ndarray | None = None
    b2: np.ndarray | None = None


def _radicand(xi: np.ndarray, omega: float, R: float) -> float:
    rad = omega**2 + R**2 / 2.0 - float(xi @ xi) / 4.0
    if rad < 0:
        raise PreconditionError(f"omega^2 + R^2/2 < |xi|^2/4 (radicand {rad:.3g})")
    return rad


def zeta_pair_schrodinger(xi, omega: float, R: float) -> ZetaPair:
    """Pair with ``zeta1 + zeta2 = -xi`` and ``zeta_j.zeta_j = omega^2``."""
    xi = np.asarray(xi, dtype=float)
    fr = build_frame(xi)
    s = np.sqrt(_radicand(xi, omega, R))
    im = 1j * R / np.sqrt(2.0) * fr.e1
    z1 = -xi / 2 + im + s * fr.e2
    z2 = -xi / 2 - im - s * fr.e2
    return ZetaPair(z1, z2, xi, float(omega), float(R), "schrodinger", fr)


def cdot(a, b) -> complex:
    """Bilinear dot product (no conjugation)."""
    return complex(np.sum(np.asarray(a) * np.asarray(b)))


def bloch_shift(zeta, grid: GridSpec) -> Theta:
    """Half-cell shift maximizing ``min_k |Im(zeta).k|`` over the grid band."""
    v = np.imag(np.asarray(zeta, dtype=complex))
    best, best_val = SHIFTS[0], -1.0
    for t in SHIFTS:
        kx, ky, kz = wavevectors(grid, t)
        val = float(np.min(np.abs(v[0] * kx + v[1] * ky + v[2] * kz)))
        if val > best_val * (1 + 1e-12):
            best, best_val = t, val
    return best


class FaddeevOperator:
    """Spectral inverse of ``-Lap - 2i zeta.grad`` in one Bloch class."""

    def __init__(self, zeta, grid: GridSpec, theta: Theta | None = None, floor: float = 1e-8, max_fraction: float = 0.01):
        self.zeta = np.asarray(zeta, dtype=complex)
        if not np.any(np.imag(self.zeta)):
            raise PreconditionError("Im zeta must be nonzero")
        self.grid = grid
        self.theta = bloch_shift(self.zeta, grid) if theta is None else tuple(theta)
        kx, ky, kz = wavevectors(grid, self.theta)
        z = self.zeta
        self.symbol = kx * kx + ky * ky + kz * kz + 2.0 * (z[0] * kx + z[1] * ky + z[2] * kz)
        cut = floor * float(np.sum(np.abs(z) ** 2))
        dead = np.abs(self.symbol) < cut
        self.floored = int(np.count_nonzero(dead))
        if self.floored > max_fraction * dead.size:
            raise ResonanceError(f"{self.floored} of {dead.size} modes on the characteristic set")
        with np.errstate(divide="ignore", invalid="ignore"):
            self.inv_symbol = np.where(dead, 0.0, 1.0 / self.symbol)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return inverse(forward(rhs, self.grid, self.theta) * self.inv_symbol, self.grid, self.theta)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return inverse(forward(psi, self.grid, self.theta) * self.symbol, self.grid, self.theta)


def faddeev_solve(zeta, rhs: ScalarField, theta: Theta | None = None) -> ScalarField:
    """Solve ``(-Lap - 2i zeta.grad) psi = rhs``.

    The samples of ``rhs`` are read in the solution's Bloch class, which is
    harmless for sources supported inside the box.
    """
    op = FaddeevOperator(zeta, rhs.grid, theta)
    return ScalarField(rhs.grid, op.solve(rhs.samples), op.theta)


@dataclass(frozen=True)
class CgoSolution:
    zeta: np.ndarray
    psi: ScalarField
    iterations: int
    residual: float
    psi_norm_2s: float
    history: tuple[float, ...] = field(default=(), repr=False)


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a) / nb) if nb > 0 else float(np.linalg.norm(a))


def fixed_point(step, x0: np.ndarray, tol: float, max_iter: int, stall: int = 5):
    """Iterate ``x <- step(x)`` until the relative update drops below ``tol``.

    Raises ContractionError when the update fails to shrink ``stall`` times
    in a row, DivergenceError at the iteration cap.
    """
    x = x0
    history: list[float] = []
    worse = 0
    for it in range(1, max_iter + 1):
        x_new = step(x)
        upd = _rel(x_new - x, x_new)
        history.append(upd)
        x = x_new
        if upd < tol or not np.any(x):
            return x, it, history
        if len(history) > 1 and upd >= history[-2]:
            worse += 1
            if worse >= stall:
                raise ContractionError(f"no contraction after {it} iterations (update {upd:.3g})")
        else:
            worse = 0
    raise DivergenceError(f"no convergence in {max_iter} iterations", history[-1])


def cgo_remainder(q: ScalarField, zeta, s: float = 2.0, tol: float = 1e-10, max_iter: int = 200,
                  op: FaddeevOperator | None = None) -> CgoSolution:
    """Remainder ``psi`` of the CGO solution for potential ``q``."""
    zeta = np.asarray(zeta, dtype=complex)
    op = op or FaddeevOperator(zeta, q.grid)
    qs = q.samples
    psi, its, hist = fixed_point(lambda p: op.solve(-qs * (1.0 + p)), np.zeros(q.grid.shape, complex), tol, max_iter)
    src = qs * (1.0 + psi)
    residual = _rel(op.apply(psi) + src, src) if np.any(src) else 0.0
    field_ = ScalarField(q.grid, psi, op.theta)
    norm = sobolev_norm(SpectrumField(q.grid, forward(psi, q.grid, op.theta), op.theta), 2 * s)
    return CgoSolution(zeta, field_, its, residual, norm, tuple(hist))


def cauchy_norm_proxy(R: float, omega: float) -> float:
    """Size of the Cauchy data of a CGO solution, up to a constant."""
    return float(np.exp(R / np.sqrt(2.0)) * np.sqrt(R * R + omega * omega))
