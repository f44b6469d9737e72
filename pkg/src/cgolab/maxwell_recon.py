"""Conductivity reconstruction from noisy 8x8 CGO pairings.

The pairing ``((Q1 - Q2) Z1, Y2)`` of a CGO solution ``Z1`` for medium 1 with
an adjoint solution ``Y2`` for medium 2 is, to leading order, a known
constant times the Fourier transform of ``kappa2^2 - kappa1^2 =
i omega (sigma2 - sigma1)`` at ``xi``.  Inverting that constant gives an
estimate of ``(sigma2 - sigma1)^(xi)``; everything else is error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bounds
from .errors import NumericalError, PreconditionError
from .maxwell_cgo import (
    ConjField,
    Vector8CgoSolution,
    amplitude,
    cgo_Ystar,
    cgo_Z,
    zeta_pair_maxwell,
)
from .maxwell_reduce import Q_LABEL, Medium8, assemble_Q, assemble_W, structure_mask
from .schro_recon import ADVERSARIAL, fit_envelope, map_modes, mode_rng, noise_direction
from .spectral_field import GridSpec, SpectrumField, forward, lattice_modes, sobolev_norm


def _phase(zeta1, zeta2, grid: GridSpec) -> np.ndarray:
    """exp(i (zeta1 - conj zeta2).x), a real plane wave for a Maxwell pair."""
    d = np.asarray(zeta1) - np.conj(zeta2)
    x, y, z = grid.coords()
    return np.exp(1j * (d[0] * x + d[1] * y + d[2] * z))


def inner(Y1: ConjField, Y2: ConjField) -> complex:
    """Box integral of ``Y1 . conj(Y2)`` for two CGO-type fields."""
    G = np.sum(Y1.samples() * np.conj(Y2.samples()), axis=0)
    return complex(np.sum(G * _phase(Y1.zeta, Y2.zeta, Y1.grid)) * Y1.grid.cell)


def q_difference(med1: Medium8, med2: Medium8) -> np.ndarray:
    if med1.grid != med2.grid or med1.omega != med2.omega:
        raise PreconditionError("media must share grid and omega")
    key = ("dQ", id(med2))
    if key not in med1._cache:
        med1._cache[key] = (med2, assemble_Q(med1, Q_LABEL).entries - assemble_Q(med2, Q_LABEL).entries)
    return med1._cache[key][1]


@dataclass(frozen=True)
class PairingReport:
    volume: complex
    commutator: complex

    @property
    def discrepancy(self) -> float:
        scale = max(abs(self.volume), abs(self.commutator))
        return abs(self.volume - self.commutator) / scale if scale > 0 else 0.0


def pairing_volume(dQ: np.ndarray, Z1: Vector8CgoSolution, Y2: Vector8CgoSolution) -> complex:
    G1, G2 = Z1.field.samples(), Y2.field.samples()
    mask = structure_mask(Q_LABEL)
    acc = np.zeros(G1.shape[1:], complex)
    for i in range(8):
        row = np.zeros_like(acc)
        for j in range(8):
            if mask[i, j]:
                row += dQ[i, j] * G1[j]
        acc += np.conj(G2[i]) * row
    return complex(np.sum(acc * _phase(Z1.zeta, Y2.zeta, Z1.field.grid)) * Z1.field.grid.cell)


def pairing_maxwell(med1: Medium8, med2: Medium8, Z1: Vector8CgoSolution, Y2: Vector8CgoSolution,
                    Y1: ConjField | None = None) -> PairingReport:
    """Volume form and commutator form ``(Y1, P Y2) - (P Y1, Y2)`` of the pairing."""
    dQ = q_difference(med1, med2)
    vol = pairing_volume(dQ, Z1, Y2)
    if Y1 is None:
        W1 = assemble_W(med1).entries
        Y1 = Z1.field.apply_P() - Z1.field.apply_matrix(W1.transpose(1, 0, 2, 3, 4), med1.omega)
    F2 = Y2.field
    comm = inner(Y1, F2.apply_P()) - inner(Y1.apply_P(), F2)
    return PairingReport(vol, comm)


@dataclass(frozen=True)
class MaxwellModeMeasurement:
    xi: np.ndarray
    R_used: float
    true_pairing: complex
    noisy_pairing: complex
    epsilon: float
    y1_norm1: float
    y2_norm1: float
    sigma_hat_est: complex
    leading_coefficient: complex


def leading_coefficient(pair, omega: float) -> complex:
    """(zeta1.b1)(conj zeta2 . conj b2) i omega / (|zeta1||zeta2|)."""
    c = (pair.zeta1 @ pair.b1) * np.conj(pair.zeta2 @ pair.b2)
    return complex(c * 1j * omega / (np.linalg.norm(pair.zeta1) * np.linalg.norm(pair.zeta2)))


def reconstruct_sigma_mode(med1: Medium8, med2: Medium8, xi, omega: float, epsilon: float, R_star: float,
                           mode: str = ADVERSARIAL, rng=None, s: float = 2.0, tol: float = 1e-10,
                           force_zero_remainder: bool = False, drop_gradient: bool = False) -> MaxwellModeMeasurement:
    """One Fourier mode of ``sigma2 - sigma1`` (continuum transform convention).

    ``force_zero_remainder`` keeps only the leading exponentials;
    ``drop_gradient`` additionally evaluates the pairing with the kappa^2
    difference alone, removing the first-order ``D kappa`` couplings.
    """
    xi = np.asarray(xi, float)
    r = float(np.linalg.norm(xi))
    R = R_star if r <= omega + R_star else r
    pair = zeta_pair_maxwell(xi, omega, R)
    A = amplitude(pair.zeta1, np.zeros(3), pair.b1, "A", omega)
    Z1 = cgo_Z(med1, pair.zeta1, A, s, tol, force_zero_remainder, diagnostics=False)
    Y2 = cgo_Ystar(med2, pair.zeta2, pair.b2, s, tol, force_zero_remainder, diagnostics=False)
    W1 = assemble_W(med1).entries
    Y1 = Z1.field.apply_P() - Z1.field.apply_matrix(W1.transpose(1, 0, 2, 3, 4), omega)
    if drop_gradient:
        dk2 = med2.kappa**2 - med1.kappa**2
        dQ = np.zeros((8, 8) + dk2.shape, complex)
        for i in range(8):
            dQ[i, i] = dk2
        true = pairing_volume(dQ, Z1, Y2)
    else:
        true = pairing_volume(q_difference(med1, med2), Z1, Y2)
    n1, n2 = Y1.h1_ball(), Y2.norm_1
    eta = noise_direction(true, mode, rng)
    noisy = true + epsilon * n1 * n2 * eta
    coef = leading_coefficient(pair, omega)
    if abs(coef) < 1e-12:
        raise NumericalError("degenerate leading coefficient")
    return MaxwellModeMeasurement(xi, R, true, noisy, epsilon, n1, n2, noisy / coef, coef)


@dataclass(frozen=True)
class MaxwellReconstruction:
    sigma_tilde_est: SpectrumField
    sigma_tilde_true: SpectrumField
    err_minus_s: float
    T_used: float
    R_star: float
    regime: str
    params: dict
    failed_modes: int = 0
    flagged: bool = False


def half_space(modes: np.ndarray) -> np.ndarray:
    """One representative of each pair {m, -m} in ``modes``: first nonzero coordinate positive.

    Modes whose negation is not in ``modes`` (the -n/2 lattice edge) are kept as well.
    """
    present = {tuple(m) for m in modes}
    keep = []
    for m in modes:
        nz = m[np.nonzero(m)[0]]
        if nz.size == 0 or nz[0] > 0 or tuple(-m) not in present:
            keep.append(m)
    return np.array(keep, dtype=int).reshape(-1, 3)


def reconstruct_sigma(med1: Medium8, med2: Medium8, epsilon: float, s: float = 2.0, mode: str = ADVERSARIAL,
                      seed: int = 0, T_max: float | None = None, R_star: float | None = None,
                      E_floor: float = 1.0, hermitian_fill: bool = True, threads: int = 1,
                      tol: float = 1e-10) -> MaxwellReconstruction:
    """Estimate ``sigma2 - sigma1`` on all lattice modes with ``|xi| <= T``."""
    g = med1.grid
    omega = med1.omega
    if epsilon == 0:
        Rs = 1.0 if R_star is None else R_star
        plan = bounds.RegimePlan("eps_zero", T_max if T_max is not None else g.nyquist(), Rs, omega, math.inf)
    else:
        plan = bounds.plan_maxwell(omega, -math.log(epsilon), E_floor)
        if R_star is not None:
            plan = bounds._split(omega, plan.E, R_star, plan.flagged)
    modes = lattice_modes(g, plan.T)
    todo = half_space(modes) if hermitian_fill else modes
    present = {tuple(m) for m in modes}

    def one(m):
        try:
            meas = reconstruct_sigma_mode(med1, med2, m * g.dk, omega, epsilon, plan.R_star, mode,
                                          mode_rng(seed, m), s, tol)
            return meas.sigma_hat_est
        except NumericalError:
            return None

    values = map_modes(one, list(todo), threads)
    failed = sum(v is None for v in values)
    est = np.zeros(g.shape, complex)
    for m, v in zip(todo, values):
        c = 0.0 if v is None else v / g.volume
        est[tuple(m % g.n)] = c
        if hermitian_fill and np.any(m) and tuple(-m) in present:
            est[tuple(-m % g.n)] = np.conj(c)
    truth = SpectrumField(g, forward(med2.sigma.samples - med1.sigma.samples, g))
    err = sobolev_norm(SpectrumField(g, est - truth.coeffs), -s)
    params = dict(omega=omega, epsilon=epsilon, s=s, mode=mode)
    return MaxwellReconstruction(SpectrumField(g, est), truth, err, plan.T, plan.R_star, plan.regime,
                                 params, failed, plan.flagged)


@dataclass(frozen=True)
class MaxwellRow:
    omega: float
    epsilon: float
    s: float
    R_star: float
    T: float
    regime: str
    err_minus_s: float
    bound_term1: float
    bound_term2: float
    bound_term3: float
    fitted_C: float
    fitted_eps_power: float


@dataclass(frozen=True)
class MaxwellCurve:
    rows: tuple[MaxwellRow, ...]
    fitted_C: float
    ls_C: float
    eps_powers: dict
    failed_cells: int = 0

    COLUMNS = ("omega", "epsilon", "s", "R_star", "T", "regime", "err_minus_s",
               "bound_term1", "bound_term2", "bound_term3", "fitted_C", "fitted_eps_power")

    def power_flags(self, target: float = 0.5, tol: float = 0.15) -> dict:
        return {om: abs(p - target) > tol for om, p in self.eps_powers.items() if not math.isnan(p)}


def eps_power(epsilons, errors) -> float:
    """Slope of log(err) against log(eps)."""
    if len(epsilons) < 2:
        return math.nan
    return float(np.polyfit(np.log(epsilons), np.log(errors), 1)[0])


def stability_sweep_maxwell(media_of, omegas, epsilons, s: float = 2.0, mode: str = ADVERSARIAL,
                            seed: int = 0, threads: int = 1, hermitian_fill: bool = True,
                            cache: dict | None = None) -> MaxwellCurve:
    """``media_of(omega)`` returns the (medium1, medium2) pair at that frequency."""
    if not omegas or not epsilons:
        raise PreconditionError("omegas and epsilons must be nonempty")
    cache = {} if cache is None else cache
    raw = []
    for eps in sorted(epsilons):
        for om in sorted(omegas):
            key = (om, eps, s, mode, seed, hermitian_fill)
            if key not in cache:
                m1, m2 = media_of(om)
                cache[key] = reconstruct_sigma(m1, m2, eps, s, mode, seed, hermitian_fill=hermitian_fill, threads=threads)
            raw.append((om, eps, cache[key]))
    terms = [bounds.bound_maxwell(om, eps, s) for om, eps, _ in raw]
    env, ls = fit_envelope([r.err_minus_s for *_, r in raw], [t[3] for t in terms])
    powers = {}
    for om in sorted(set(omegas)):
        pts = sorted((eps, r.err_minus_s) for o, eps, r in raw if o == om)
        powers[om] = eps_power([p[0] for p in pts], [p[1] for p in pts])
    rows = tuple(
        MaxwellRow(om, eps, s, r.R_star, r.T_used, r.regime, r.err_minus_s, t[0], t[1], t[2], env, powers[om])
        for (om, eps, r), t in zip(raw, terms)
    )
    failed = sum(r.failed_modes > 0 for *_, r in raw)
    return MaxwellCurve(rows, env, ls, powers, failed)
