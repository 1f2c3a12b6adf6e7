"""Closed-form quantities for the concentric pair (B_1, B_R).

Everything here is exact up to floating point: the radial potential kernel,
the radial minimizer ``u*``, the ball energy ``R -> E(B_1, B_R)``, the regime
structure of that map, the critical radius where it returns to its value at
R = 1, and the ball lower bound used by the verification campaign.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ProblemParams",
    "Regime",
    "RegimeReport",
    "BallEnergyCurve",
    "RegimeError",
    "unit_ball_volume",
    "phi",
    "phi_prime",
    "ball_energy",
    "u_star",
    "gradient_ratio",
    "regime_classify",
    "critical_radius",
    "lemma5_predicate",
    "ball_lower_bound",
    "ball_energy_curve",
]


class RegimeError(ValueError):
    """Raised when an operation is requested in a regime where it is undefined."""


@dataclass(frozen=True)
class ProblemParams:
    """Dimension ``n``, exponent ``p`` and Robin coefficient ``beta``."""

    n: int
    p: float
    beta: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        if not (math.isfinite(self.p) and self.p > 1):
            raise ValueError(f"p must be finite and > 1, got {self.p!r}")
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be finite and > 0, got {self.beta!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def b(self) -> float:
        """beta ** (1 / (p - 1)), the scale that appears in every radial formula."""
        return self.beta ** (1.0 / (self.p - 1.0))

    @property
    def omega(self) -> float:
        return unit_ball_volume(self.n)

    @property
    def sphere_area(self) -> float:
        """Surface measure of the unit sphere, n * omega_n."""
        return self.n * self.omega


class Regime(str, enum.Enum):
    MONOTONE_DECREASING = "MonotoneDecreasing"
    BUMP_THEN_DECREASING = "BumpThenDecreasing"
    MIN_AT_ONE = "MinAtOne"


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    alpha: float
    beta1: float
    beta2: float
    critical_radius: float | None
    limit_at_infinity: float

    @property
    def balls_pair_is_unit(self) -> bool:
        """True when (B_1, B_1) minimizes for every volume bound."""
        return self.regime is Regime.MIN_AT_ONE


@dataclass
class BallEnergyCurve:
    params: ProblemParams
    radii: np.ndarray
    energies: np.ndarray = field(repr=False)


def unit_ball_volume(n: int) -> float:
    """Lebesgue measure of the unit ball in R^n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def _check_rho(rho):
    if np.any(np.asarray(rho) <= 0):
        raise ValueError("rho must be positive")


def phi(params: ProblemParams, rho):
    """Radial potential kernel: log(rho) if p == n, else a negative power."""
    _check_rho(rho)
    n, p = params.n, params.p
    if p == n:
        return np.log(rho)
    return -((p - 1.0) / (n - p)) * np.power(rho, -(n - p) / (p - 1.0))


def phi_prime(params: ProblemParams, rho):
    _check_rho(rho)
    return np.power(rho, -(params.n - 1.0) / (params.p - 1.0))


def _phi_between(params: ProblemParams, r, R):
    """phi(R) - phi(r), free of cancellation for p close to n and for r close to R."""
    n, p = params.n, params.p
    lq = np.log(R) - np.log(r)
    if p == n:
        return lq
    k = (n - p) / (p - 1.0)
    return -np.power(r, -k) * np.expm1(-k * lq) / k


def _phi_diff(params: ProblemParams, rho):
    return _phi_between(params, 1.0, rho)


def _denominator(params: ProblemParams, R):
    return phi_prime(params, R) + params.b * _phi_diff(params, R)


def ball_energy(params: ProblemParams, R):
    """Energy of the concentric pair (B_1, B_R); equals n*omega_n*beta at R = 1.

    Accepts scalars or arrays of radii.
    """
    R_arr = np.asarray(R, dtype=float)
    if np.any(R_arr < 1.0) or np.any(~np.isfinite(R_arr)):
        raise ValueError("R must be finite and >= 1")
    out = params.sphere_area * params.beta / _denominator(params, R_arr) ** (params.p - 1.0)
    return float(out) if out.ndim == 0 else out


def u_star(params: ProblemParams, R: float, r):
    """Radial minimizer on (B_1, B_R) evaluated at radius ``r``."""
    if not R > 1.0:
        raise ValueError("R must be > 1")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0.0) or np.any(r_arr > R * (1 + 1e-15)):
        raise ValueError("r must lie in [0, R]")
    rr = np.maximum(r_arr, 1.0)
    out = (phi_prime(params, R) + params.b * _phi_between(params, rr, R)) / _denominator(params, R)
    return float(out) if out.ndim == 0 else out


def gradient_ratio(params: ProblemParams, R: float, r):
    """|du*/dr| / u* on the annulus 1 <= r <= R."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 1.0) or np.any(r_arr > R * (1 + 1e-15)):
        raise ValueError("r must lie in [1, R]")
    b = params.b
    out = b * phi_prime(params, r_arr) / (phi_prime(params, R) + b * _phi_between(params, np.minimum(r_arr, R), R))
    return float(out) if out.ndim == 0 else out


def _thresholds(params: ProblemParams):
    n, p = params.n, params.p
    return (n - p) / (p - 1.0), (n - 1.0) / (p - 1.0)


def _classify(params: ProblemParams) -> Regime:
    lo, hi = _thresholds(params)
    b = params.b
    if b >= hi:
        return Regime.MONOTONE_DECREASING
    if b <= lo:
        return Regime.MIN_AT_ONE
    return Regime.BUMP_THEN_DECREASING


def regime_classify(params: ProblemParams) -> RegimeReport:
    n, p = params.n, params.p
    lo, hi = _thresholds(params)
    regime = _classify(params)
    alpha = hi / params.b
    beta1 = lo ** (p - 1.0) if p < n else 0.0
    beta2 = hi ** (p - 1.0)
    limit = params.sphere_area * lo ** (p - 1.0) if p < n else 0.0
    rc = critical_radius(params) if regime is Regime.BUMP_THEN_DECREASING else None
    return RegimeReport(regime, alpha, beta1, beta2, rc, limit)


def critical_radius(params: ProblemParams, rtol: float = 1e-12) -> float:
    """Unique R > alpha with E(B_1, B_R) = E(B_1, B_1), by bisection.

    Only defined in the bump regime. The denominator of the ball energy is
    increasing beyond alpha, so the root of ``denominator(R) - 1`` is bracketed
    by doubling the upper end from alpha.
    """
    if _classify(params) is not Regime.BUMP_THEN_DECREASING:
        raise RegimeError("critical radius exists only in the BumpThenDecreasing regime")
    alpha = _thresholds(params)[1] / params.b

    def f(R):
        return _denominator(params, R) - 1.0

    lo, hi = alpha, 2.0 * alpha
    for _ in range(60):
        if f(hi) >= 0.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise RegimeError("no sign change below 2**60 * alpha; beta is at or below beta1")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def lemma5_predicate(params: ProblemParams, R: float, n_grid: int = 2048) -> tuple[bool, bool]:
    """Both sides of the gradient-ratio / ball-energy equivalence, on grids.

    Returns ``(ratio_bounded, energy_above)`` where the first checks
    |grad u*|/u* <= beta**(1/(p-1)) on [1, R] and the second checks
    E(B_1, B_rho) >= E(B_1, B_R) for rho in [1, R].
    """
    if not R > 1.0:
        raise ValueError("R must be > 1")
    grid = np.linspace(1.0, R, n_grid)
    grid[0], grid[-1] = 1.0, R
    ratio_ok = bool(np.max(gradient_ratio(params, R, grid)) <= params.b * (1.0 + 1e-12))
    energy_ok = bool(np.min(ball_energy(params, grid)) >= ball_energy(params, R) * (1.0 - 1e-12))
    return ratio_ok, energy_ok


def ball_lower_bound(params: ProblemParams, M: float) -> tuple[float, float]:
    """Minimum of E(B_1, B_R) over 1 <= R <= (M / omega_n)**(1/n), with its argmin."""
    omega = params.omega
    if M < omega * (1 - 1e-12):
        raise ValueError("M must be at least omega_n")
    R_max = max(1.0, (M / omega) ** (1.0 / params.n))
    regime = _classify(params)
    if regime is Regime.MONOTONE_DECREASING:
        r_opt = R_max
    elif regime is Regime.BUMP_THEN_DECREASING:
        r_opt = R_max if R_max >= critical_radius(params) else 1.0
    else:
        r_opt = 1.0
    return ball_energy(params, r_opt), r_opt


def ball_energy_curve(params: ProblemParams, radii) -> BallEnergyCurve:
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be a strictly increasing 1-d sequence")
    return BallEnergyCurve(params, radii, np.atleast_1d(ball_energy(params, radii)))
