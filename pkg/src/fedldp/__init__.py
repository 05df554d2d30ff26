"""Noise calibration, utility/rate bounds, and a seeded simulator for
locally differentially private federated SGD."""

from .accountants import (
    CalibrationRequest,
    CalibrationResult,
    Method,
    calibrate,
    epsilon_from_noise,
    noise_ac1,
    noise_ac2,
    noise_ma,
    noise_proposed,
)
from .fedsgd_sim import SimConfig, SimResult, run_simulation
from .privacy_core import (
    MechanismParams,
    PrivacyBudget,
    RdpCost,
    ValidityReport,
    check_validity,
    compose_rdp,
    gaussian_dp_single_round,
    optimal_alpha,
    rdp_cost_subsampled_gaussian,
    rdp_to_dp,
)
from .tradeoff import (
    LossRegularity,
    TradeoffPoint,
    UserSpec,
    aggregate_sigma,
    rate_upper_bound,
    sweep,
    utility_lower_bound,
    validity_caps,
)

__version__ = "1.0.0"

__all__ = [
    "__version__",
    "CalibrationRequest",
    "CalibrationResult",
    "Method",
    "calibrate",
    "epsilon_from_noise",
    "noise_ac1",
    "noise_ac2",
    "noise_ma",
    "noise_proposed",
    "SimConfig",
    "SimResult",
    "run_simulation",
    "MechanismParams",
    "PrivacyBudget",
    "RdpCost",
    "ValidityReport",
    "check_validity",
    "compose_rdp",
    "gaussian_dp_single_round",
    "optimal_alpha",
    "rdp_cost_subsampled_gaussian",
    "rdp_to_dp",
    "LossRegularity",
    "TradeoffPoint",
    "UserSpec",
    "aggregate_sigma",
    "rate_upper_bound",
    "sweep",
    "utility_lower_bound",
    "validity_caps",
]
