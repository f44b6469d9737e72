"""Closed-form side: mode-error weights, regime plans, bound curves and the
optimal-frequency analysis of the Schrodinger estimate.

Boundary ties in every case split go to the first case (the ``<=`` branch).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import minimize_scalar

from .errors import PreconditionError

CASE_I = "case_i"
CASE_II = "case_ii"


def phi(R: float, omega: float, m: float, M: float) -> float:
    if R + omega <= 0:
        raise PreconditionError("R + omega must be positive")
    return (m * omega + M) / (R + omega)


def beta(xi_norm: float, R: float, omega: float) -> float:
    rad = 2 * omega**2 + R**2 - xi_norm**2 / 2
    if rad < 0:
        raise PreconditionError(f"negative radicand {rad:.3g}")
    return R + math.sqrt(rad)


@dataclass(frozen=True)
class RegimePlan:
    regime: str
    T: float
    R_star: float
    omega: float
    E: float
    flagged: bool = False

    @property
    def R_rule(self) -> str:
        return f"R = {self.R_star:g} for |xi| <= {self.omega + self.R_star:g}, R = |xi| beyond"

    def R_for(self, xi_norm: float) -> float:
        """R* inside the ball of radius omega + R*, |xi| outside (continuous at the seam)."""
        return self.R_star if xi_norm <= self.omega + self.R_star else xi_norm


def _split(omega: float, E: float, R_star: float, flagged: bool = False) -> RegimePlan:
    if omega + R_star <= E / 2:
        return RegimePlan(CASE_I, E / 2, R_star, omega, E, flagged)
    return RegimePlan(CASE_II, omega + R_star, R_star, omega, E, flagged)


def plan_schrodinger(omega: float, E: float, R_star: float) -> RegimePlan:
    if omega <= 1 or E <= 1:
        raise PreconditionError("need omega > 1 and E > 1")
    return _split(omega, E, R_star)


def plan_maxwell(omega: float, E: float, E_floor: float = 1.0) -> RegimePlan:
    """R* = E/(2 sqrt 2); plans below the E floor are flagged, not rejected."""
    return _split(omega, E, E / (2 * math.sqrt(2)), flagged=E <= E_floor)


def _E(eps: float) -> float:
    if not 0 < eps < 1:
        raise PreconditionError("eps must lie in (0, 1)")
    return -math.log(eps)


def bound_schrodinger(omega: float, eps: float, s: float, C: float = 1.0) -> float:
    E = _E(eps)
    return C * (omega**2 * eps + omega * (omega + E) ** (-(2 * s - 3) / 2))


def bound_maxwell(omega: float, eps: float, s: float, C: float = 1.0) -> tuple[float, float, float, float]:
    E = _E(eps)
    t1 = C * (omega**2 + E**2) ** 1.5 * math.sqrt(eps) / omega
    t2 = C * (omega + E) ** (-(2 * s - 3) / 2)
    t3 = C / (omega + E)
    return t1, t2, t3, t1 + t2 + t3


# -- optimal frequency --------------------------------------------------------


def F(t: float, eps: float, s: float) -> float:
    """Consolidated bound as a function of t = omega^2."""
    return eps * t + (t + _E(eps) ** 2) ** (-(2 * s - 5) / 4)


def dF(t: float, eps: float, s: float) -> float:
    return eps - (2 * s - 5) / 4 * (t + _E(eps) ** 2) ** (-(2 * s - 1) / 4)


@dataclass(frozen=True)
class OptimalFrequency:
    t_star: float
    case: str
    F_min: float


def optimal_frequency(eps: float, s: float) -> OptimalFrequency:
    if s <= 2.5:
        raise PreconditionError("the optimal-frequency analysis needs s > 5/2")
    E = _E(eps)
    a = (2 * s - 5) / 4
    if eps < a * (1 + E * E) ** (-(2 * s - 1) / 4):
        t = (eps / a) ** (-4 / (2 * s - 1)) - E * E
        return OptimalFrequency(t, "b", F(t, eps, s))
    return OptimalFrequency(1.0, "a", F(1.0, eps, s))


def holder_constant(s: float) -> float:
    r = 4 / (2 * s - 5)
    return r ** (-4 / (2 * s - 1)) + r ** ((2 * s - 5) / (2 * s - 1))


def holder_exponent(s: float) -> float:
    return (2 * s - 5) / (2 * s - 1)


def golden_minimum(eps: float, s: float, hi: float) -> float:
    """Golden-section minimizer of F over t, searched in log t for scale."""
    f = lambda u: F(math.exp(u), eps, s)
    res = minimize_scalar(f, bracket=(0.0, math.log(hi)), method="golden", options={"xtol": 1e-12})
    return math.exp(res.x)


def maxwell_optimal_omega(eps: float, s: float, hi: float = 1e4) -> float:
    """Frequency minimizing the Maxwell bound total at fixed ``eps``."""
    res = minimize_scalar(lambda w: bound_maxwell(w, eps, s)[3], bounds=(1.0, hi), method="bounded",
                          options={"xatol": 1e-9})
    return float(res.x)
