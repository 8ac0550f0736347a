"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: config problems exit 2, numerical
failures exit 3.  Everything derives from :class:`SmmlError` so callers can
catch toolkit failures without swallowing genuine bugs.
"""

from __future__ import annotations

__all__ = [
    "SmmlError",
    "ConfigError",
    "DomainError",
    "UnsupportedDimensionError",
    "InvariantViolation",
    "MarginalError",
    "NonConvergenceError",
]


class SmmlError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SmmlError):
    """Malformed or contradictory run configuration."""


class DomainError(SmmlError):
    """Parameter outside the open interior of the parameter region."""


class UnsupportedDimensionError(SmmlError):
    """Operation only defined for a particular statistic dimension."""


class InvariantViolation(SmmlError):
    """A structural invariant (masses, partition cover, sync) failed."""


class MarginalError(SmmlError):
    """Marginal construction failed; carries the offending data point."""

    def __init__(self, message: str, key=None):
        super().__init__(message)
        self.key = key


class NonConvergenceError(SmmlError):
    """Iterative solver exhausted its budget; carries the last residual."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual
