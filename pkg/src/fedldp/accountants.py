"""The four noise-variance calibrators and the forward accountant.

Each calibrator answers the same question: given a per-user (epsilon, delta)
target, sampling probability q and round count T, what is the minimal
admissible noise multiplier squared sigma^2?  The common prefactor
4 q^2 / (1 - q) carries the post-clipping sensitivity of 2C and the Poisson
subsampling; the bracketed factors are where the composition routes differ.

  proposed  refined moments accountant with the budget-optimal order folded
            into the closed form
  ma        moments accountant with the classic RDP-to-DP conversion
  ac1       advanced composition: invert the per-round (eps0, delta0) from the
            T-fold relations, then apply the single-release Gaussian bound
  ac2       the improved advanced composition theorem's closed form

All logs are natural.  Remainder terms of the underlying derivations are
dropped; the attached :class:`~fedldp.privacy_core.ValidityReport` tells the
caller whether the result lies in the region where that is defensible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    DomainError,
    EmptyGridError,
    InfeasibleBudgetError,
    NonPositiveBoundError,
    SolverError,
)
from .privacy_core import (
    MechanismParams,
    PrivacyBudget,
    ValidityReport,
    alpha_upper_limit,
    check_validity,
    compose_rdp,
    rdp_cost_subsampled_gaussian,
    rdp_to_dp,
)

__all__ = [
    "Method",
    "CalibrationRequest",
    "CalibrationResult",
    "noise_proposed",
    "noise_ma",
    "noise_ac1",
    "noise_ac2",
    "calibrate",
    "epsilon_from_noise",
]

AC1_DELTA_TILDE_DEFAULT = 1e-5
_AC1_BISECTION_REL_TOL = 1e-12


class Method(str, Enum):
    """Calibration methods in their canonical reporting order."""

    PROPOSED = "proposed"
    MA = "ma"
    AC1 = "ac1"
    AC2 = "ac2"


@dataclass(frozen=True)
class CalibrationRequest:
    budget: PrivacyBudget
    q: float
    rounds: int
    method: Method
    ac1_delta_tilde: float = AC1_DELTA_TILDE_DEFAULT

    def __post_init__(self) -> None:
        if not 0 < self.q < 1:
            raise DomainError(f"q must be in (0, 1), got {self.q}")
        if self.rounds < 1 or int(self.rounds) != self.rounds:
            raise DomainError(f"rounds must be a positive integer, got {self.rounds}")
        if not 0 < self.ac1_delta_tilde < 1:
            raise DomainError(
                f"ac1_delta_tilde must be in (0, 1), got {self.ac1_delta_tilde}"
            )
        if self.method == Method.AC1 and self.ac1_delta_tilde >= self.budget.delta:
            raise InfeasibleBudgetError(
                f"delta {self.budget.delta} must exceed the composition slack "
                f"delta_tilde {self.ac1_delta_tilde}"
            )


@dataclass(frozen=True)
class CalibrationResult:
    """Minimal sigma^2 plus the validity flags evaluated at that sigma.

    For ac1 the solved per-round pair (epsilon0, delta0) is attached so the
    inversion can be audited by recomposition.
    """

    method: Method
    sigma_sq: float
    validity: ValidityReport
    epsilon0: float | None = None
    delta0: float | None = None

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma_sq)


def _result(method: Method, sigma_sq: float, req: CalibrationRequest, **extra) -> CalibrationResult:
    if not sigma_sq > 0:
        raise NonPositiveBoundError(f"calibrated sigma^2 is not positive: {sigma_sq}")
    params = MechanismParams(
        q=req.q, sigma=math.sqrt(sigma_sq), clip=1.0, rounds=req.rounds
    )
    return CalibrationResult(
        method=method,
        sigma_sq=sigma_sq,
        validity=check_validity(params, req.budget),
        **extra,
    )


def noise_proposed(req: CalibrationRequest) -> CalibrationResult:
    """Refined moments-accountant bound.

    sigma^2 = 4 q^2 T / (1-q) * [ 2 L / eps^2 + 1/eps
                                  - (2/eps^2)(ln(2L) + 1 - ln eps) ],  L = ln(1/delta)

    The subtracted term is the gain over the plain ``ma`` row.  For small
    epsilon the bracket turns nonpositive and the closed form says nothing;
    that regime raises :class:`NonPositiveBoundError` instead of returning a
    vacuous bound.
    """
    eps, delta = req.budget.epsilon, req.budget.delta
    big_l = math.log(1.0 / delta)
    bracket = (
        2.0 * big_l / eps**2
        + 1.0 / eps
        - (2.0 / eps**2) * (math.log(2.0 * big_l) + 1.0 - math.log(eps))
    )
    if bracket <= 0:
        raise NonPositiveBoundError(
            f"refined bound bracket is {bracket} <= 0 at epsilon={eps}, delta={delta}"
        )
    prefactor = 4.0 * req.q**2 * req.rounds / (1.0 - req.q)
    return _result(Method.PROPOSED, prefactor * bracket, req)


def noise_ma(req: CalibrationRequest) -> CalibrationResult:
    """Moments-accountant bound: 4 q^2 T/(1-q) * (2 ln(1/delta)/eps^2 + 1/eps)."""
    eps, delta = req.budget.epsilon, req.budget.delta
    prefactor = 4.0 * req.q**2 * req.rounds / (1.0 - req.q)
    return _result(
        Method.MA, prefactor * (2.0 * math.log(1.0 / delta) / eps**2 + 1.0 / eps), req
    )


def _ac1_compose(eps0: float, rounds: int, delta_tilde: float) -> float:
    """T-fold advanced-composition epsilon for per-round eps0."""
    return math.sqrt(2.0 * rounds * math.log(1.0 / delta_tilde)) * eps0 + (
        rounds * eps0 * math.expm1(eps0)
    )


def noise_ac1(req: CalibrationRequest) -> CalibrationResult:
    """Advanced-composition bound via its implicit per-round budget.

    Splits delta = T delta0 + delta_tilde, solves the strictly increasing
    relation  eps = sqrt(2 T ln(1/delta_tilde)) eps0 + T eps0 (e^eps0 - 1)
    for eps0 by bracketed bisection on [0, eps], then applies the
    single-release Gaussian-mechanism bound

        sigma^2 = 4 q^2/(1-q) * (2/eps0^2) * ln(4/(5 delta0)).
    """
    eps, delta = req.budget.epsilon, req.budget.delta
    delta_tilde = req.ac1_delta_tilde
    if delta <= delta_tilde:
        raise InfeasibleBudgetError(
            f"delta {delta} must exceed the composition slack delta_tilde {delta_tilde}"
        )
    delta0 = (delta - delta_tilde) / req.rounds

    lo, hi = 0.0, eps
    # Monotone map with value -eps < 0 at 0; the bracket cannot fail for eps > 0.
    if not _ac1_compose(hi, req.rounds, delta_tilde) >= eps:
        raise SolverError("advanced-composition bracket failed")  # pragma: no cover
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _ac1_compose(mid, req.rounds, delta_tilde) >= eps:
            hi = mid
        else:
            lo = mid
        if hi - lo <= _AC1_BISECTION_REL_TOL * hi:
            break
    eps0 = 0.5 * (lo + hi)
    sigma_sq = (
        4.0 * req.q**2 / (1.0 - req.q) * (2.0 / eps0**2) * math.log(4.0 / (5.0 * delta0))
    )
    return _result(Method.AC1, sigma_sq, req, epsilon0=eps0, delta0=delta0)


def noise_ac2(req: CalibrationRequest) -> CalibrationResult:
    """Improved advanced composition: 4 q^2/(1-q) * 8 T ln(e + eps/delta) / eps^2."""
    eps, delta = req.budget.epsilon, req.budget.delta
    sigma_sq = (
        4.0
        * req.q**2
        / (1.0 - req.q)
        * 8.0
        * req.rounds
        * math.log(math.e + eps / delta)
        / eps**2
    )
    return _result(Method.AC2, sigma_sq, req)


def calibrate(req: CalibrationRequest) -> CalibrationResult:
    """Dispatch a request to its method's calibrator."""
    if req.method == Method.PROPOSED:
        return noise_proposed(req)
    if req.method == Method.MA:
        return noise_ma(req)
    if req.method == Method.AC1:
        return noise_ac1(req)
    if req.method == Method.AC2:
        return noise_ac2(req)
    raise DomainError(f"unknown method {req.method!r}")


def epsilon_from_noise(
    params: MechanismParams, delta: float, grid_size: int = 512
) -> float:
    """Forward accountant: tightest epsilon achievable at the given noise.

    Minimizes rdp_to_dp(compose(cost(q, sigma, alpha), T), delta) over a
    logarithmic alpha grid spanning (1, sigma^2 ln(1/(q sigma))], the largest
    order the leading-order cost supports.
    """
    alpha_max = alpha_upper_limit(params.q, params.sigma)
    if alpha_max <= 1.0:
        raise EmptyGridError(
            f"order upper limit {alpha_max} <= 1; no admissible Renyi order"
        )
    offsets = np.geomspace(1e-6 * (alpha_max - 1.0), alpha_max - 1.0, grid_size)
    best = math.inf
    for alpha in 1.0 + offsets:
        cost = rdp_cost_subsampled_gaussian(params.q, params.sigma, float(alpha))
        eps = rdp_to_dp(compose_rdp(cost, params.rounds), delta)
        if eps < best:
            best = eps
    return best
