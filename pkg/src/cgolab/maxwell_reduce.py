"""Reduction of the time-harmonic Maxwell system to an 8x8 Schrodinger form.

Fields are 8-vectors laid out as ``(Phi1, H, Phi2, E)``: slot 0, slots 1-3,
slot 4, slots 5-7.  The first-order operator ``P`` is built from
``P+(k)(f, u) = (k.u, k f + k x u)`` and ``P-(k)(f, u) = (k.u, k f - k x u)``
and acts as ``P(top, bottom) = (P- bottom, P+ top)``.  Its symbol at ``k``
is ``psymbol(k)``; the complex-frequency matrix ``P(zeta)`` used in the
CGO formulas is ``-i psymbol(zeta)``.

Medium fields: ``gamma = 1 + i sigma/omega``, ``alpha = log gamma``,
``kappa = omega sqrt(gamma)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .spectral_field import (
    ZERO_CLASS,
    GridSpec,
    ScalarField,
    SpectrumField,
    Theta,
    dealiased_product,
    forward,
    inverse,
    sobolev_norm,
    wavevectors,
)

W_LABEL, Q_LABEL, Q1_LABEL, Q2_LABEL = "W", "Q", "Q1", "Q2"


def cross_matrix(a) -> np.ndarray:
    """``[a]_x`` with ``[a]_x v = a x v``; works on stacked component arrays."""
    a0, a1, a2 = a
    z = np.zeros_like(a0)
    return np.array([[z, -a2, a1], [a2, z, -a0], [-a1, a0, z]])


def psymbol(k, Y: np.ndarray) -> np.ndarray:
    """Apply the symbol of P at wave vector ``k`` to an 8-vector (field)."""
    k0, k1, k2 = k
    f, u0, u1, u2, g, v0, v1, v2 = Y
    kv = k0 * v0 + k1 * v1 + k2 * v2
    ku = k0 * u0 + k1 * u1 + k2 * u2
    kxv = (k1 * v2 - k2 * v1, k2 * v0 - k0 * v2, k0 * v1 - k1 * v0)
    kxu = (k1 * u2 - k2 * u1, k2 * u0 - k0 * u2, k0 * u1 - k1 * u0)
    return np.array([
        kv, k0 * g - kxv[0], k1 * g - kxv[1], k2 * g - kxv[2],
        ku, k0 * f + kxu[0], k1 * f + kxu[1], k2 * f + kxu[2],
    ])


def apply_P_samples(Y: np.ndarray, grid: GridSpec, theta: Theta = ZERO_CLASS) -> np.ndarray:
    k = wavevectors(grid, theta)
    return inverse(psymbol(k, forward(Y, grid, theta)), grid, theta)


def apply_P(Y: ScalarField) -> ScalarField:
    if Y.samples.shape[0] != 8:
        raise PreconditionError("expected an 8-component field")
    return ScalarField(Y.grid, apply_P_samples(Y.samples, Y.grid, Y.theta), Y.theta)


def apply_P_zeta(zeta, v) -> np.ndarray:
    """The constant matrix ``P(zeta) = -i psymbol(zeta)`` applied to ``v``."""
    return -1j * psymbol(np.asarray(zeta, dtype=complex), np.asarray(v, dtype=complex))


def p_zeta_matrix(zeta) -> np.ndarray:
    return np.stack([apply_P_zeta(zeta, e) for e in np.eye(8)], axis=1)


# -- media --------------------------------------------------------------------


def _deriv_coeffs(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Spectra of D_a f, with the unpaired Nyquist plane dropped."""
    k = wavevectors(grid)
    nyq = grid.n // 2
    out = []
    for a, ka in enumerate(k):
        d = coeffs * ka
        sl = [slice(None)] * 3
        sl[a] = nyq
        d[tuple(sl)] = 0.0
        out.append(d)
    return np.array(out)


@dataclass(frozen=True)
class Medium8:
    sigma: ScalarField
    omega: float
    gamma: np.ndarray
    alpha: np.ndarray
    kappa: np.ndarray
    norm_2s2: float
    Dalpha: np.ndarray
    hess_alpha: np.ndarray
    Dkappa: np.ndarray
    # assembled potentials, filled lazily
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def grid(self) -> GridSpec:
        return self.sigma.grid

    @property
    def lap_alpha(self) -> np.ndarray:
        return np.trace(self.hess_alpha)

    def conjugate(self) -> "Medium8":
        """Medium fields of the conjugate construction: alpha-bar, kappa-bar."""
        return _with_fields(self, self.alpha.conj(), self.kappa.conj())


def _with_fields(base: Medium8 | None, alpha, kappa, **kw) -> Medium8:
    grid = base.grid if base is not None else kw["sigma"].grid
    ca = forward(alpha, grid)
    dca = _deriv_coeffs(ca, grid)
    Dalpha = inverse(dca, grid)
    # d_a d_b alpha = -D_a D_b alpha
    hess = -np.array([[inverse(_deriv_coeffs(dca[a], grid)[b], grid) for b in range(3)] for a in range(3)])
    k = wavevectors(grid)
    for a in range(3):
        hess[a, a] = -inverse(k[a] ** 2 * ca, grid)
    Dkappa = inverse(_deriv_coeffs(forward(kappa, grid), grid), grid)
    if base is not None:
        kw = dict(sigma=base.sigma, omega=base.omega, gamma=base.gamma, norm_2s2=base.norm_2s2)
    return Medium8(alpha=alpha, kappa=kappa, Dalpha=Dalpha, hess_alpha=hess, Dkappa=Dkappa, **kw)


def derive_medium(sigma: ScalarField, omega: float, s: float = 2.0) -> Medium8:
    sig = np.asarray(sigma.samples)
    if np.max(np.abs(sig.imag)) > 0:
        raise PreconditionError("sigma must be real")
    sig = sig.real
    if np.any(sig < 0):
        raise PreconditionError("sigma must be non-negative")
    if omega <= 1:
        raise PreconditionError("omega must exceed 1")
    if np.any(sig[sigma.grid.radius() > 1.0] != 0):
        raise PreconditionError("sigma must be supported in the unit ball")
    gamma = 1.0 + 1j * sig / omega
    if np.max(np.abs(np.angle(gamma))) > np.pi / 2 - 0.01:
        raise PreconditionError("gamma too close to the branch cut")
    alpha = np.log(gamma)
    kappa = omega * np.sqrt(gamma)
    g = sigma.grid
    norm = sobolev_norm(SpectrumField(g, forward(sig, g)), 2 * s + 2)
    return _with_fields(None, alpha, kappa, sigma=ScalarField(g, sig), omega=float(omega), gamma=gamma, norm_2s2=norm)


# -- matrix fields -------------------------------------------------------------


@dataclass(frozen=True)
class Matrix8Field:
    grid: GridSpec
    entries: np.ndarray  # (8, 8, n, n, n)
    label: str

    def matvec(self, Y: np.ndarray) -> np.ndarray:
        return np.einsum("ij...,j...->i...", self.entries, Y)

    def transpose(self) -> "Matrix8Field":
        return Matrix8Field(self.grid, self.entries.transpose(1, 0, 2, 3, 4), self.label + "^t")

    def conj(self) -> "Matrix8Field":
        return Matrix8Field(self.grid, self.entries.conj(), "conj " + self.label)

    def adjoint(self) -> "Matrix8Field":
        return Matrix8Field(self.grid, self.entries.conj().transpose(1, 0, 2, 3, 4), self.label + "^*")


def _eye8(scalar: np.ndarray) -> np.ndarray:
    out = np.zeros((8, 8) + scalar.shape, dtype=complex)
    for i in range(8):
        out[i, i] = scalar
    return out


def _cached(build):
    def wrapper(med: Medium8, *args):
        key = (build.__name__,) + args
        if key not in med._cache:
            out = build(med, *args)
            out.entries.setflags(write=False)
            med._cache[key] = out
        return med._cache[key]

    wrapper.__name__ = build.__name__
    wrapper.__doc__ = build.__doc__
    return wrapper


@_cached
def assemble_W(med: Medium8) -> Matrix8Field:
    W = _eye8(med.kappa)
    half = 0.5 * med.Dalpha
    W[0, 5:8] += half
    W[1:4, 4] += half
    W[1:4, 5:8] += cross_matrix(half)
    return Matrix8Field(med.grid, W, W_LABEL)


def assemble_Q(med: Medium8, which: str = Q_LABEL) -> Matrix8Field:
    """Zero-order potentials of the three second-order factorizations."""
    return _assemble_Q(med, which)


@_cached
def _assemble_Q(med: Medium8, which: str) -> Matrix8Field:
    if which == Q2_LABEL:
        out = assemble_Q(med.conjugate(), Q1_LABEL)
        # the conjugate construction flips the sign of the curl couplings
        e = out.entries.copy()
        e[1:4, 5:8] *= -1
        e[5:8, 1:4] *= -1
        return Matrix8Field(med.grid, e, Q2_LABEL)
    if which not in (Q_LABEL, Q1_LABEL):
        raise PreconditionError(f"unknown potential {which!r}")
    ka2 = med.kappa**2
    dd = np.sum(med.Dalpha**2, axis=0) / 4
    lap = med.lap_alpha
    block = med.hess_alpha - 0.5 * lap * np.eye(3)[:, :, None, None, None]  # (2 hess - lap I)/2
    Q = _eye8(-ka2)
    two_dk = 2 * med.Dkappa
    if which == Q_LABEL:
        Q[0, 0] += 0.5 * lap - dd
        Q[1:4, 1:4] += block
        for i in range(1, 4):
            Q[i, i] -= dd
        Q[0, 5:8] -= two_dk
        Q[1:4, 4] -= two_dk
        Q[4, 1:4] -= two_dk
        Q[5:8, 0] -= two_dk
    else:
        Q[4, 4] += -0.5 * lap - dd
        Q[5:8, 5:8] -= block
        for i in range(5, 8):
            Q[i, i] -= dd
        cx = cross_matrix(two_dk)
        Q[1:4, 5:8] -= cx
        Q[5:8, 1:4] += cx
    return Matrix8Field(med.grid, Q, which)


# zero pattern of each display, used by tests
def structure_mask(which: str) -> np.ndarray:
    m = np.zeros((8, 8), bool)
    np.fill_diagonal(m, True)
    if which == W_LABEL:
        m[0, 5:8] = m[1:4, 4] = True
        m[1:4, 5:8] = ~np.eye(3, dtype=bool)
    elif which == Q_LABEL:
        m[1:4, 1:4] = True
        m[0, 5:8] = m[1:4, 4] = m[4, 1:4] = m[5:8, 0] = True
    else:
        m[5:8, 5:8] = True
        m[1:4, 5:8] = m[5:8, 1:4] = ~np.eye(3, dtype=bool)
    return m


# -- factorization check ---------------------------------------------------------


def _spec(a: np.ndarray, grid: GridSpec, theta: Theta = ZERO_CLASS) -> SpectrumField:
    return SpectrumField(grid, forward(a, grid, theta), theta)


def matvec_dealiased(M: np.ndarray, Yc: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Spectrum of ``M Y`` for a matrix field (samples) and a class-zero spectrum."""
    out = np.zeros_like(Yc)
    Ys = [SpectrumField(grid, Yc[j]) for j in range(8)]
    for i in range(8):
        for j in range(8):
            if np.any(M[i, j]):
                out[i] += dealiased_product(_spec(M[i, j], grid), Ys[j]).coeffs
    return out


def _P_coeffs(Yc: np.ndarray, grid: GridSpec) -> np.ndarray:
    return psymbol(wavevectors(grid), Yc)


def verify_factorization(med: Medium8, identity: int, Y: ScalarField) -> float:
    """Relative residual ``||LHS Y - RHS Y||_0 / ||Y||_2`` of one factorization."""
    g = med.grid
    W = assemble_W(med).entries
    Wt = W.transpose(1, 0, 2, 3, 4)
    if identity == 1:
        left, right, Q = W, -Wt, assemble_Q(med, Q_LABEL)
    elif identity == 2:
        left, right, Q = -Wt, W, assemble_Q(med, Q1_LABEL)
    elif identity == 3:
        left, right, Q = Wt.conj(), -W.conj(), assemble_Q(med, Q2_LABEL)
    else:
        raise PreconditionError("identity must be 1, 2 or 3")
    Yc = forward(Y.samples, g)
    inner = _P_coeffs(Yc, g) + matvec_dealiased(right, Yc, g)
    lhs = _P_coeffs(inner, g) + matvec_dealiased(left, inner, g)
    k = wavevectors(g)
    k2 = k[0] ** 2 + k[1] ** 2 + k[2] ** 2
    rhs = k2 * Yc + matvec_dealiased(Q.entries, Yc, g)
    num = np.sqrt(g.volume * np.sum(np.abs(lhs - rhs) ** 2))
    den = np.sqrt(g.volume * np.sum((1 + k2) ** 2 * np.abs(Yc) ** 2))
    return float(num / den)


def band_limited_field(grid: GridSpec, rng: np.random.Generator, components: int = 8, fraction: float = 2 / 3) -> ScalarField:
    """Random smooth field with modes up to ``fraction`` of the Nyquist band."""
    k = wavevectors(grid)
    kmax = fraction * grid.nyquist()
    keep = (np.abs(k[0]) < kmax) & (np.abs(k[1]) < kmax) & (np.abs(k[2]) < kmax)
    shape = (components,) + grid.shape
    c = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * keep
    c *= np.exp(-0.5 * (k[0] ** 2 + k[1] ** 2 + k[2] ** 2) / (0.25 * kmax) ** 2)
    return ScalarField(grid, inverse(c, grid))


def kappa_sq_difference(m1: Medium8, m2: Medium8) -> np.ndarray:
    return m2.kappa**2 - m1.kappa**2
