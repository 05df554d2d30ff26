"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` that sweep rows and the
CLI error records use, so failures stay greppable in emitted artifacts.
"""

from __future__ import annotations

__all__ = [
    "FedldpError",
    "DomainError",
    "NonPositiveBoundError",
    "InfeasibleBudgetError",
    "SolverError",
    "EmptyGridError",
    "ConfigError",
    "GradBoundExceededError",
    "CalibrationError",
]


class FedldpError(Exception):
    """Base class; ``code`` is the stable identifier serialized in outputs."""

    code = "error"


class DomainError(FedldpError, ValueError):
    """An argument left the mathematical domain of an operation."""

    code = "domain_error"


class CalibrationError(FedldpError, ValueError):
    """Base for failures of the noise calibrators."""

    code = "calibration_error"


class NonPositiveBoundError(CalibrationError):
    """The refined-accountant bracket is <= 0, so the closed form is vacuous."""

    code = "nonpositive_bracket"


class InfeasibleBudgetError(CalibrationError):
    """Advanced composition cannot split delta below its slack term."""

    code = "infeasible_budget"


class SolverError(FedldpError, RuntimeError):
    """A numeric solve failed to bracket or converge."""

    code = "solver_failure"


class EmptyGridError(FedldpError, ValueError):
    """A search grid has no admissible points."""

    code = "empty_grid"


class ConfigError(FedldpError, ValueError):
    """Config validation failure; names the offending field."""

    code = "config_error"

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class GradBoundExceededError(FedldpError, RuntimeError):
    """A realized gradient norm exceeded the configured bound constant."""

    code = "grad_bound_exceeded"
