"""Renyi-DP primitives for the Poisson-subsampled Gaussian mechanism.

Scalar building blocks behind the noise calibrators: the leading-order
per-round RDP cost, linear composition over rounds, conversion to
(epsilon, delta)-DP, the budget-optimal order choice, and the validity
conditions under which the leading-order cost is trustworthy.

Conventions: all logarithms are natural, epsilon is in nats, and the noise
multiplier ``sigma`` is the per-dimension noise std expressed in units of the
clipping threshold.  The mechanism's two hypotheses centred 2C apart (the
post-clipping sensitivity) make every formula here independent of C itself.

All functions are pure; values are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate, stats

from .errors import DomainError, SolverError

__all__ = [
    "PrivacyBudget",
    "MechanismParams",
    "RdpCost",
    "ValidityReport",
    "rdp_cost_subsampled_gaussian",
    "compose_rdp",
    "rdp_to_dp",
    "optimal_alpha",
    "alpha_upper_limit",
    "check_validity",
    "gaussian_dp_single_round",
    "renyi_log_moment_numeric",
]


@dataclass(frozen=True)
class PrivacyBudget:
    """Per-user target (epsilon, delta) pair."""

    epsilon: float
    delta: float

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise DomainError(f"delta must be in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class MechanismParams:
    """One user's subsampled Gaussian mechanism.

    ``q`` is the per-record Poisson sampling probability, ``sigma`` the noise
    multiplier (per-dimension noise std is clip * sigma), ``clip`` the
    gradient-norm threshold, and ``rounds`` the number of compositions.
    ``rounds = 0`` is allowed and means "no composition yet", which the
    forward accountant uses; calibration requests require at least one round.
    """

    q: float
    sigma: float
    clip: float
    rounds: int

    def __post_init__(self) -> None:
        if not 0 < self.q < 1:
            raise DomainError(f"q must be in (0, 1), got {self.q}")
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if not self.clip > 0:
            raise DomainError(f"clip must be positive, got {self.clip}")
        if self.rounds < 0 or int(self.rounds) != self.rounds:
            raise DomainError(f"rounds must be a nonnegative integer, got {self.rounds}")


@dataclass(frozen=True)
class RdpCost:
    """An (alpha, gamma) Renyi-DP guarantee at order alpha."""

    alpha: float
    gamma: float

    def __post_init__(self) -> None:
        if not self.alpha > 1:
            raise DomainError(f"Renyi order must exceed 1, got {self.alpha}")
        if not self.gamma >= 0:
            raise DomainError(f"RDP cost must be nonnegative, got {self.gamma}")


@dataclass(frozen=True)
class ValidityReport:
    """Outcome of the three validity conditions on a calibrated mechanism.

    ``q_ok``:       q < 1/(16 sigma)          (strict)
    ``sigma_ok``:   sigma >= 1
    ``epsilon_ok``: epsilon > 2 ln(1/delta) * max(delta, 1/(sigma^2 ln(1/(q sigma))))
    """

    q_ok: bool
    sigma_ok: bool
    epsilon_ok: bool

    @property
    def overall(self) -> bool:
        return self.q_ok and self.sigma_ok and self.epsilon_ok


def rdp_cost_subsampled_gaussian(q: float, sigma: float, alpha: float) -> RdpCost:
    """Leading-order per-round RDP cost of the subsampled Gaussian mechanism.

    gamma = 2 q^2 (alpha + 1) / ((1 - q) sigma^2)

    Valid only inside the region q < 1/(16 sigma), sigma >= 1 (and order not
    above :func:`alpha_upper_limit`); outside it the dropped remainder is not
    negligible, so the preconditions are enforced as hard errors.
    """
    if not sigma >= 1:
        raise DomainError(f"sigma must be >= 1 inside the validity region, got {sigma}")
    if not 0 < q * 16 * sigma < 1:
        raise DomainError(
            f"q must lie in (0, 1/(16 sigma)) = (0, {1 / (16 * sigma)}), got {q}"
        )
    if not alpha > 1:
        raise DomainError(f"Renyi order must exceed 1, got {alpha}")
    gamma = 2.0 * q * q * (alpha + 1.0) / ((1.0 - q) * sigma * sigma)
    return RdpCost(alpha=alpha, gamma=gamma)


def compose_rdp(cost: RdpCost, rounds: int) -> RdpCost:
    """Linear RDP composition: (alpha, gamma) becomes (alpha, rounds * gamma)."""
    if rounds < 0 or int(rounds) != rounds:
        raise DomainError(f"rounds must be a nonnegative integer, got {rounds}")
    return RdpCost(alpha=cost.alpha, gamma=rounds * cost.gamma)


def rdp_to_dp(cost: RdpCost, delta: float) -> float:
    """Classic RDP-to-DP conversion: epsilon = gamma + ln(1/delta)/(alpha - 1)."""
    if not 0 < delta < 1:
        raise DomainError(f"delta must be in (0, 1), got {delta}")
    return cost.gamma + math.log(1.0 / delta) / (cost.alpha - 1.0)


def optimal_alpha(budget: PrivacyBudget) -> float:
    """Budget-optimal Renyi order 2 ln(1/delta) / epsilon.

    The returned value can be <= 1 for loose budgets (epsilon >= 2 ln(1/delta));
    such orders are outside the RDP range and :class:`RdpCost` rejects them.
    """
    return 2.0 * math.log(1.0 / budget.delta) / budget.epsilon


def alpha_upper_limit(q: float, sigma: float) -> float:
    """Largest order the leading-order cost supports: sigma^2 ln(1/(q sigma)).

    Nonpositive when q * sigma >= 1, i.e. no admissible order exists.
    """
    if q <= 0 or sigma <= 0:
        raise DomainError("q and sigma must be positive")
    if q * sigma >= 1:
        return 0.0
    return sigma * sigma * math.log(1.0 / (q * sigma))


def check_validity(params: MechanismParams, budget: PrivacyBudget) -> ValidityReport:
    """Evaluate the three validity conditions; always returns a report.

    The epsilon condition is evaluated post hoc on the sigma at hand (there is
    no fixed-point iteration between epsilon and sigma).  When q * sigma >= 1
    the condition's right-hand side is undefined and the flag is False.
    """
    q_ok = params.q * 16.0 * params.sigma < 1.0
    sigma_ok = params.sigma >= 1.0
    log_inv_qsigma = -math.log(params.q * params.sigma) if params.q * params.sigma < 1 else 0.0
    if log_inv_qsigma <= 0.0:
        epsilon_ok = False
    else:
        rhs = 2.0 * math.log(1.0 / budget.delta) * max(
            budget.delta, 1.0 / (params.sigma**2 * log_inv_qsigma)
        )
        epsilon_ok = budget.epsilon > rhs
    return ValidityReport(q_ok=q_ok, sigma_ok=sigma_ok, epsilon_ok=epsilon_ok)


def _gaussian_delta(epsilon: float, sensitivity: float, sigma_abs: float) -> float:
    """Exact delta(epsilon) of a single Gaussian release (tight tradeoff form).

    delta = Phi(s/(2 sigma) - eps sigma/s) - e^eps Phi(-s/(2 sigma) - eps sigma/s)
    """
    a = sensitivity / (2.0 * sigma_abs)
    b = epsilon * sigma_abs / sensitivity
    # exp(eps) * Phi(...) in log space; eps can be large enough to overflow exp.
    return float(stats.norm.cdf(a - b) - math.exp(epsilon + stats.norm.logcdf(-a - b)))


def gaussian_dp_single_round(sensitivity: float, sigma_abs: float, delta: float) -> float:
    """Smallest epsilon making one Gaussian release (epsilon, delta)-DP.

    Solves the exact Gaussian tail-probability characterization by bisection;
    used as a T = 1 sanity oracle against the composed accountants.
    """
    if sensitivity < 0:
        raise DomainError(f"sensitivity must be nonnegative, got {sensitivity}")
    if not sigma_abs > 0:
        raise DomainError(f"sigma_abs must be positive, got {sigma_abs}")
    if not 0 < delta < 1:
        raise DomainError(f"delta must be in (0, 1), got {delta}")
    if sensitivity == 0:
        return 0.0
    if _gaussian_delta(0.0, sensitivity, sigma_abs) <= delta:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(200):
        if _gaussian_delta(hi, sensitivity, sigma_abs) <= delta:
            break
        hi *= 2.0
    else:
        raise SolverError("failed to bracket epsilon for the Gaussian mechanism")
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        if _gaussian_delta(mid, sensitivity, sigma_abs) > delta:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(hi, 1.0):
            return 0.5 * (lo + hi)
    raise SolverError("epsilon bisection for the Gaussian mechanism did not converge")


def renyi_log_moment_numeric(
    q: float, sigma: float, alpha: float, direction: str = "forward"
) -> float:
    """Numerically integrated log-moment of the subsampled Gaussian pair.

    With mu0 = N(0, sigma^2) and mu1 = N(2, sigma^2) (unit clip; the mixture
    pair is scale-free in C) and mu = (1-q) mu0 + q mu1:

      forward: ln E_{z~mu} [(mu(z)/mu0(z))^alpha]
      reverse: ln E_{z~mu0}[(mu0(z)/mu(z))^alpha]

    This is the independent oracle for :func:`rdp_cost_subsampled_gaussian`:
    the forward value equals alpha times the order-(alpha+1) Renyi divergence
    of mu from mu0, which the closed form approximates by alpha * gamma.
    Integration is done on an expm1/log1p-stabilized integrand so the tiny
    excess over 1 survives in double precision.
    """
    if direction not in ("forward", "reverse"):
        raise DomainError(f"direction must be 'forward' or 'reverse', got {direction!r}")
    if not 0 < q < 1 or sigma <= 0 or alpha <= 1:
        raise DomainError("require 0 < q < 1, sigma > 0, alpha > 1")
    s2 = sigma * sigma
    power = alpha + 1.0 if direction == "forward" else -alpha

    def integrand(z: float) -> float:
        log_ratio = math.log1p(q * math.expm1((2.0 * z - 2.0) / s2))
        core = math.expm1(power * log_ratio)
        return math.exp(-z * z / (2.0 * s2)) / math.sqrt(2.0 * math.pi * s2) * core

    lo = -14.0 * sigma - 2.0
    hi = 2.0 * (alpha + 2.0) + 14.0 * sigma
    value, _ = integrate.quad(integrand, lo, hi, limit=400, epsabs=1e-15, epsrel=1e-12)
    return math.log1p(value)
