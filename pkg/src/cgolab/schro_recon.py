"""Fourier-mode reconstruction for the attenuated Schrodinger equation.

For each lattice frequency ``xi`` a pair of CGO solutions with
``zeta1 + zeta2 = -xi`` turns the pairing ``int (q1 - q2) u1 u2`` into an
approximation of the Fourier transform of ``q1 - q2`` at ``xi``.  Noise of
size ``eps * proxy(R, omega)^2`` is added to the pairing, which stands in
for the distance between the two Cauchy data sets.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bounds
from .cgo_scalar import (
    CgoSolution,
    FaddeevOperator,
    cauchy_norm_proxy,
    cgo_remainder,
    zeta_pair_schrodinger,
)
from .errors import NumericalError, PreconditionError
from .spectral_field import (
    GridSpec,
    ScalarField,
    SpectrumField,
    forward,
    lattice_modes,
    sobolev_norm,
)

ADVERSARIAL = "adversarial"
RANDOM = "random"


def in_unit_ball(f: ScalarField, tol: float = 0.0) -> bool:
    outside = f.grid.radius() > 1.0
    return not np.any(np.abs(f.samples[..., outside]) > tol)


@dataclass(frozen=True)
class AttenuatedPotential:
    sigma: ScalarField
    c: ScalarField
    omega: float
    q: ScalarField
    sigma_norm_2s: float = 0.0
    c_norm_2s: float = 0.0


def assemble_q(sigma: ScalarField, c: ScalarField, omega: float, s: float = 2.0) -> AttenuatedPotential:
    if omega <= 1:
        raise PreconditionError("omega must exceed 1")
    if sigma.grid != c.grid:
        raise PreconditionError("grid mismatch")
    if not (in_unit_ball(sigma) and in_unit_ball(c)):
        raise PreconditionError("sigma and c must be supported in the unit ball")
    sig, cc = sigma.samples.real, c.samples.real
    q = ScalarField(sigma.grid, 1j * omega * sig + cc)
    g = sigma.grid
    norm = lambda a: sobolev_norm(SpectrumField(g, forward(a, g)), 2 * s)
    return AttenuatedPotential(ScalarField(g, sig), ScalarField(g, cc), float(omega), q, norm(sig), norm(cc))


def pairing_true(p1: AttenuatedPotential, p2: AttenuatedPotential, u1: CgoSolution, u2: CgoSolution) -> complex:
    """Grid quadrature of ``int (q1 - q2) exp(i(zeta1+zeta2).x)(1+psi1)(1+psi2)``."""
    g = p1.q.grid
    if p2.q.grid != g or u1.psi.grid != g or u2.psi.grid != g:
        raise PreconditionError("grid mismatch")
    if p1.omega != p2.omega:
        raise PreconditionError("omega mismatch")
    k = np.real(u1.zeta + u2.zeta)
    x, y, z = g.coords()
    phase = np.exp(1j * (k[0] * x + k[1] * y + k[2] * z))
    integrand = (p1.q.samples - p2.q.samples) * phase * (1 + u1.psi.samples) * (1 + u2.psi.samples)
    return complex(np.sum(integrand) * g.cell)


@dataclass(frozen=True)
class ModeMeasurement:
    xi: np.ndarray
    R_used: float
    true_value: complex
    noisy_value: complex
    epsilon: float
    noise_scale: float


def noise_direction(true_value: complex, mode: str, rng: np.random.Generator | None) -> complex:
    if mode == ADVERSARIAL:
        return true_value / abs(true_value) if true_value != 0 else 1.0 + 0j
    if mode == RANDOM:
        if rng is None:
            raise PreconditionError("random noise needs a generator")
        return complex(np.exp(2j * np.pi * rng.random()))
    raise PreconditionError(f"unknown noise mode {mode!r}")


def perturb(true_value: complex, epsilon: float, R: float, omega: float, mode: str = ADVERSARIAL,
            rng: np.random.Generator | None = None, xi=None) -> ModeMeasurement:
    if epsilon < 0:
        raise PreconditionError("epsilon must be non-negative")
    scale = cauchy_norm_proxy(R, omega) ** 2
    eta = noise_direction(true_value, mode, rng)
    noisy = true_value + epsilon * scale * eta
    xi = np.zeros(3) if xi is None else np.asarray(xi, float)
    return ModeMeasurement(xi, R, true_value, noisy, epsilon, scale)


def mode_rng(seed: int, m) -> np.random.Generator:
    """Generator keyed by the integer mode, independent of sweep order."""
    return np.random.default_rng([int(seed)] + [int(v) + (1 << 16) for v in m])


def reconstruct_mode(p1: AttenuatedPotential, p2: AttenuatedPotential, xi, omega: float, epsilon: float,
                     R_star: float, mode: str = ADVERSARIAL, rng=None, s: float = 2.0,
                     tol: float = 1e-10, force_zero_remainder: bool = False) -> ModeMeasurement:
    xi = np.asarray(xi, float)
    r = float(np.linalg.norm(xi))
    R = R_star if r <= omega + R_star else r
    pair = zeta_pair_schrodinger(xi, omega, R)
    g = p1.q.grid
    sols = []
    for zeta, p in ((pair.zeta1, p1), (pair.zeta2, p2)):
        if force_zero_remainder:
            sols.append(CgoSolution(zeta, ScalarField(g, np.zeros(g.shape)), 0, 0.0, 0.0))
        else:
            sols.append(cgo_remainder(p.q, zeta, s=s, tol=tol))
    true = pairing_true(p1, p2, sols[0], sols[1])
    return perturb(true, epsilon, R, omega, mode, rng, xi)


@dataclass(frozen=True)
class ReconstructionResult:
    q_tilde_est: SpectrumField
    q_tilde_true: SpectrumField
    err_minus_s: float
    T_used: float
    regime: str
    params: dict
    failed_modes: int = 0


def truth_spectrum(p1: AttenuatedPotential, p2: AttenuatedPotential) -> SpectrumField:
    g = p1.q.grid
    return SpectrumField(g, forward(p1.q.samples - p2.q.samples, g))


def plan_for(omega: float, epsilon: float, R_star: float, T_max: float | None, grid: GridSpec) -> bounds.RegimePlan:
    if epsilon == 0:
        T = T_max if T_max is not None else grid.nyquist()
        return bounds.RegimePlan("eps_zero", T, R_star, omega, math.inf)
    return bounds.plan_schrodinger(omega, -math.log(epsilon), R_star)


def map_modes(fn, items, threads: int = 1):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def reconstruct_potential(p1: AttenuatedPotential, p2: AttenuatedPotential, omega: float, epsilon: float,
                          s: float = 2.0, R_star: float = 1.0, mode: str = ADVERSARIAL, seed: int = 0,
                          T_max: float | None = None, threads: int = 1,
                          force_zero_remainder: bool = False) -> ReconstructionResult:
    g = p1.q.grid
    plan = plan_for(omega, epsilon, R_star, T_max, g)
    modes = lattice_modes(g, plan.T)
    idx = tuple((modes % g.n).T)

    def one(m):
        try:
            meas = reconstruct_mode(p1, p2, m * g.dk, omega, epsilon, R_star, mode, mode_rng(seed, m), s,
                                    force_zero_remainder=force_zero_remainder)
            return meas.noisy_value
        except NumericalError:
            return None

    values = map_modes(one, list(modes), threads)
    failed = sum(v is None for v in values)
    est = np.zeros(g.shape, complex)
    est[idx] = np.array([0 if v is None else v for v in values]) / g.volume
    truth = truth_spectrum(p1, p2)
    err = sobolev_norm(SpectrumField(g, est - truth.coeffs), -s)
    params = dict(omega=omega, epsilon=epsilon, s=s, R_star=R_star, mode=mode)
    return ReconstructionResult(SpectrumField(g, est), truth, err, plan.T, plan.regime, params, failed)


@dataclass(frozen=True)
class StabilityRow:
    omega: float
    epsilon: float
    s: float
    R_star: float
    T: float
    regime: str
    err_minus_s: float
    bound_value: float
    fitted_C: float = math.nan


@dataclass(frozen=True)
class StabilityCurve:
    rows: tuple[StabilityRow, ...]
    fitted_C: float
    ls_C: float
    failed_cells: int = 0

    COLUMNS = ("omega", "epsilon", "s", "R_star", "T", "regime", "err_minus_s", "bound_value", "fitted_C")


def fit_envelope(errs, bnds) -> tuple[float, float]:
    """Smallest C with err <= C*bound everywhere, and the least-squares C."""
    e, b = np.asarray(errs, float), np.asarray(bnds, float)
    env = float(np.max(e / b))
    ls = float(np.sum(e * b) / np.sum(b * b))
    return env, ls


def stability_sweep(p1_of, p2_of, omegas, epsilons, s: float = 2.0, R_star: float = 1.0,
                    mode: str = ADVERSARIAL, seed: int = 0, threads: int = 1) -> StabilityCurve:
    """Run every (omega, eps) cell.  ``p1_of(omega)`` builds the potential at omega."""
    if not omegas or not epsilons:
        raise PreconditionError("omegas and epsilons must be nonempty")
    raw = []
    failed = 0
    for eps in sorted(epsilons):
        for om in sorted(omegas):
            res = reconstruct_potential(p1_of(om), p2_of(om), om, eps, s, R_star, mode, seed, threads=threads)
            failed += res.failed_modes > 0
            raw.append((om, eps, res))
    bvals = [bounds.bound_schrodinger(om, eps, s) for om, eps, _ in raw]
    env, ls = fit_envelope([r.err_minus_s for *_, r in raw], bvals)
    rows = tuple(
        StabilityRow(om, eps, s, R_star, r.T_used, r.regime, r.err_minus_s, b, env)
        for (om, eps, r), b in zip(raw, bvals)
    )
    return StabilityCurve(rows, env, ls, failed)
