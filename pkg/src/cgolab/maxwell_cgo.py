"""Vector CGO solutions for the 8x8 system.

A solution ``exp(i zeta.x) G(x)`` is stored through its amplitude ``G``,
split into a constant 8-vector and a remainder that lives in the Bloch
class of the Faddeev solver.  Derivatives then follow from
``P(exp(i zeta.x) G) = exp(i zeta.x)(P G + psymbol(zeta) G)``.
"""

from __future__ import annotations

import math

from dataclasses import dataclass, replace

import numpy as np

from .cgo_scalar import FaddeevOperator, ZetaPair, _radicand, build_frame, fixed_point
from .errors import PreconditionError
from .maxwell_reduce import (
    Q2_LABEL,
    Q_LABEL,
    Matrix8Field,
    Medium8,
    apply_P_samples,
    assemble_Q,
    assemble_W,
    psymbol,
    structure_mask,
)
from .spectral_field import GridSpec, Theta, forward, inverse, sobolev_norm, SpectrumField, wavevectors

SQRT2 = np.sqrt(2.0)


def zeta_pair_maxwell(xi, omega: float, R: float) -> ZetaPair:
    """Pair with ``zeta1 - conj(zeta2) = -xi`` and isotropic polarizations."""
    xi = np.asarray(xi, dtype=float)
    fr = build_frame(xi)
    s = np.sqrt(_radicand(xi, omega, R))
    im = 1j * R / SQRT2 * fr.e1
    z1 = -xi / 2 + im + s * fr.e2
    z2 = xi / 2 - im + s * fr.e2
    b1 = (-1j * fr.e1 + fr.e2) / SQRT2
    b2 = (1j * fr.e1 + fr.e2) / SQRT2
    return ZetaPair(z1, z2, xi, float(omega), float(R), "maxwell", fr, b1, b2)


@dataclass(frozen=True)
class Amplitude8:
    vec: np.ndarray
    zeta: np.ndarray
    a: np.ndarray
    b: np.ndarray
    variant: str


def amplitude(zeta, a, b, variant: str, omega: float | None = None) -> Amplitude8:
    zeta = np.asarray(zeta, complex)
    a = np.asarray(a, complex)
    b = np.asarray(b, complex)
    nz = np.linalg.norm(zeta)
    if variant == "A":
        if omega is None:
            omega = float(np.sqrt(np.sum(zeta * zeta)).real)
        vec = np.concatenate([[zeta @ a], omega * b, [zeta @ b], omega * a])
    elif variant == "Astar":
        vec = np.concatenate([[zeta @ a], -np.cross(zeta, a), [zeta @ b], np.cross(zeta, b)])
    elif variant == "Astar_lower":
        vec = np.concatenate([[0], b, [0], a])
    else:
        raise PreconditionError(f"unknown amplitude variant {variant!r}")
    return Amplitude8(vec / nz, zeta, a, b, variant)


@dataclass(frozen=True)
class ConjField:
    """``exp(i zeta.x)(const + rem)`` on a grid; ``rem`` is in class ``theta``."""

    zeta: np.ndarray
    const: np.ndarray
    rem: np.ndarray
    theta: Theta
    grid: GridSpec

    def samples(self) -> np.ndarray:
        return self.const[:, None, None, None] + self.rem

    def apply_P(self) -> "ConjField":
        const = psymbol(self.zeta, self.const)
        rem = apply_P_samples(self.rem, self.grid, self.theta) + psymbol(self.zeta, self.rem)
        return replace(self, const=const, rem=rem)

    def apply_matrix(self, M: np.ndarray, m0: complex) -> "ConjField":
        """Multiply by a matrix field equal to ``m0 I`` away from a compact set."""
        full = np.einsum("ij...,j...->i...", M, self.samples())
        return replace(self, const=m0 * self.const, rem=full - m0 * self.const[:, None, None, None])

    def __add__(self, other: "ConjField") -> "ConjField":
        return replace(self, const=self.const + other.const, rem=self.rem + other.rem)

    def __sub__(self, other: "ConjField") -> "ConjField":
        return replace(self, const=self.const - other.const, rem=self.rem - other.rem)

    def l2(self) -> float:
        """Box L2 norm of the amplitude."""
        return float(np.sqrt(np.sum(np.abs(self.samples()) ** 2) * self.grid.cell))

    def h1_ball(self) -> float:
        """H1 norm of the full field ``exp(i zeta.x) G`` over the unit ball."""
        g = self.grid
        x, y, z = g.coords()
        zi = np.imag(self.zeta)
        weight = np.exp(-2 * (zi[0] * x + zi[1] * y + zi[2] * z)) * (g.radius() <= 1.0)
        G = self.samples()
        total = np.sum(np.abs(G) ** 2, axis=0)
        kk = wavevectors(g, self.theta)
        rc = forward(self.rem, g, self.theta)
        for a in range(3):
            grad = 1j * inverse(1j * kk[a] * rc, g, self.theta) * -1j  # d_a rem
            total = total + np.sum(np.abs(1j * self.zeta[a] * G + grad) ** 2, axis=0)
        return float(np.sqrt(np.sum(total * weight) * g.cell))


@dataclass(frozen=True)
class Vector8CgoSolution:
    zeta: np.ndarray
    amplitude: Amplitude8
    remainder: np.ndarray
    residual: float
    norm_1: float
    field: ConjField
    iterations: int = 0
    remainder_norm_2s: float = 0.0


def _potential(Q: Matrix8Field, omega: float) -> tuple[list[tuple[int, int]], np.ndarray]:
    V = Q.entries.copy()
    for i in range(8):
        V[i, i] += omega**2
    pattern = structure_mask(Q.label.split()[0] if Q.label in (Q_LABEL, Q2_LABEL) else Q.label)
    pairs = [(i, j) for i in range(8) for j in range(8) if pattern[i, j] and np.any(V[i, j])]
    return pairs, V


def _medium_potential(med: Medium8, label: str):
    key = ("potential", label)
    if key not in med._cache:
        med._cache[key] = _potential(assemble_Q(med, label), med.omega)
    return med._cache[key]


def _apply_sparse(pairs, V, F):
    out = np.zeros_like(F)
    for i, j in pairs:
        out[i] += V[i, j] * F[j]
    return out


def solve_remainder(Q: Matrix8Field, omega: float, zeta, A: np.ndarray, s: float = 2.0,
                    tol: float = 1e-10, max_iter: int = 200, force_zero: bool = False,
                    diagnostics: bool = True, potential=None):
    """Psi with ``(-Lap - 2i zeta.grad) Psi = -(omega^2 + Q)(A + Psi)``."""
    g = Q.grid
    op = FaddeevOperator(zeta, g)
    pairs, V = potential if potential is not None else _potential(Q, omega)
    Ac = A[:, None, None, None]
    zero = np.zeros((8,) + g.shape, complex)
    if force_zero or not pairs:
        return zero, op, 0, 0.0, 0.0
    psi, its, _ = fixed_point(lambda p: op.solve(-_apply_sparse(pairs, V, Ac + p)), zero, tol, max_iter)
    if not diagnostics:
        return psi, op, its, math.nan, math.nan
    src = _apply_sparse(pairs, V, Ac + psi)
    num = np.linalg.norm(op.apply(psi) + src)
    den = np.sqrt(np.sum(np.abs(A) ** 2) * psi[0].size + np.sum(np.abs(psi) ** 2))
    norm = sobolev_norm(SpectrumField(g, forward(psi, g, op.theta), op.theta), 2 * s)
    return psi, op, its, float(num / den), norm


def cgo_Z(med1: Medium8, zeta, amp: Amplitude8, s: float = 2.0, tol: float = 1e-10,
          force_zero_remainder: bool = False, diagnostics: bool = True) -> Vector8CgoSolution:
    """Z = exp(i zeta.x)(A + Psi) solving ``(-Lap + Q) Z = 0``.

    ``diagnostics=False`` skips the residual and norms (reported as nan).
    """
    zeta = np.asarray(zeta, complex)
    Q = assemble_Q(med1, Q_LABEL)
    psi, op, its, res, norm = solve_remainder(Q, med1.omega, zeta, amp.vec, s, tol, force_zero=force_zero_remainder,
                                              diagnostics=diagnostics, potential=_medium_potential(med1, Q_LABEL))
    cf = ConjField(zeta, amp.vec.astype(complex), psi, op.theta, med1.grid)
    return Vector8CgoSolution(zeta, amp, psi, res, cf.h1_ball() if diagnostics else math.nan, cf, its, norm)


def first_order_residual(Y: ConjField, M: np.ndarray, m0: complex) -> float:
    """``||(P + M) Y|| / (||P Y|| + ||M Y||)`` on the box."""
    PY = Y.apply_P()
    MY = Y.apply_matrix(M, m0)
    num = (PY + MY).l2()
    den = PY.l2() + MY.l2()
    return num / den if den > 0 else 0.0


@dataclass(frozen=True)
class DerivedY:
    field: ConjField
    residual: float
    phi_slots: float
    maxwell_residual: float


def derive_Y_from_Z(med1: Medium8, Z: Vector8CgoSolution) -> DerivedY:
    """Y = (P - W^t) Z with diagnostics for ``(P + W) Y = 0``."""
    W = assemble_W(med1).entries
    Wt = W.transpose(1, 0, 2, 3, 4)
    Y = Z.field.apply_P() - Z.field.apply_matrix(Wt, med1.omega)
    res = first_order_residual(Y, W, med1.omega)
    G = Y.samples()
    phi = float(np.sqrt(np.sum(np.abs(G[[0, 4]]) ** 2)) / max(np.sqrt(np.sum(np.abs(G) ** 2)), 1e-300))
    return DerivedY(Y, res, phi, maxwell_system_residual(med1, Y))


def maxwell_system_residual(med: Medium8, Y: ConjField) -> float:
    """Residual of ``curl H + i omega gamma E = 0, curl E - i omega H = 0``.

    ``Y = (0, H, 0, gamma^{1/2} E)``; curls are taken of the full field via
    ``curl(exp(i zeta.x) F) = exp(i zeta.x)(i zeta x F + curl F)``.
    """
    g = Y.grid
    G = Y.samples()
    H = G[1:4]
    E = G[5:8] / np.sqrt(med.gamma)

    def curl(F, c):
        kk = wavevectors(g, Y.theta)
        # constant part (gamma = 1 outside the support) plus a class-theta remainder
        rem = F - c[:, None, None, None]
        d = [[inverse(1j * kk[a] * forward(rem[b], g, Y.theta), g, Y.theta) for b in range(3)] for a in range(3)]
        z = 1j * Y.zeta
        return np.array([
            z[1] * F[2] - z[2] * F[1] + d[1][2] - d[2][1],
            z[2] * F[0] - z[0] * F[2] + d[2][0] - d[0][2],
            z[0] * F[1] - z[1] * F[0] + d[0][1] - d[1][0],
        ])

    cH, cE = curl(H, Y.const[1:4]), curl(E, Y.const[5:8])
    r1 = cH + 1j * med.omega * med.gamma * E
    r2 = cE - 1j * med.omega * H
    num = np.sqrt(np.sum(np.abs(r1) ** 2) + np.sum(np.abs(r2) ** 2))
    den = np.sqrt(np.sum(np.abs(cH) ** 2) + np.sum(np.abs(cE) ** 2))
    return float(num / den) if den > 0 else 0.0


def cgo_Ystar(med2: Medium8, zeta2, bstar, s: float = 2.0, tol: float = 1e-10,
              force_zero_remainder: bool = False, diagnostics: bool = True) -> Vector8CgoSolution:
    """Y* = (P - conj W) Z_* with ``(-Lap + Q(2)) Z_* = 0``; solves ``(P + W*) Y* = 0``.

    With forced-zero remainders only the leading ``exp(i zeta.x) A*`` is kept.
    """
    zeta2 = np.asarray(zeta2, complex)
    lower = amplitude(zeta2, np.zeros(3), bstar, "Astar_lower")
    upper = amplitude(zeta2, np.zeros(3), bstar, "Astar")
    g = med2.grid
    W = assemble_W(med2).entries
    Wbar = W.conj()
    Wstar = Wbar.transpose(1, 0, 2, 3, 4)
    if force_zero_remainder:
        op = FaddeevOperator(zeta2, g)
        cf = ConjField(zeta2, upper.vec, np.zeros((8,) + g.shape, complex), op.theta, g)
        return Vector8CgoSolution(zeta2, upper, cf.rem, 0.0, cf.h1_ball(), cf, 0, 0.0)
    Q2 = assemble_Q(med2, Q2_LABEL)
    psi_l, op, its, _, _ = solve_remainder(Q2, med2.omega, zeta2, lower.vec, s, tol, diagnostics=False,
                                           potential=_medium_potential(med2, Q2_LABEL))
    Zs = ConjField(zeta2, lower.vec, psi_l, op.theta, g)
    Y = Zs.apply_P() - Zs.apply_matrix(Wbar, med2.omega)
    if not np.allclose(Y.const, upper.vec - med2.omega * lower.vec, atol=1e-12):
        raise PreconditionError("amplitude assembly mismatch")
    rem = Y.samples() - upper.vec[:, None, None, None]
    if not diagnostics:
        return Vector8CgoSolution(zeta2, upper, rem, math.nan, Y.h1_ball(), Y, its, math.nan)
    res = first_order_residual(Y, Wstar, med2.omega)
    norm = sobolev_norm(SpectrumField(g, forward(Y.rem, g, op.theta), op.theta), 2 * s)
    return Vector8CgoSolution(zeta2, upper, rem, res, Y.h1_ball(), Y, its, norm)
