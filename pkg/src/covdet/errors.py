"""Exception types raised across the covdet package."""

from __future__ import annotations


class CovdetError(Exception):
    """Base class for all covdet-specific errors."""


class ShapeMismatch(CovdetError, ValueError):
    """Operands have incompatible dimensions."""


class NotPositiveDefinite(CovdetError, ValueError):
    """Matrix is not numerically positive definite, even after the jitter retry."""


class SingularSystem(CovdetError, ValueError):
    """Linear system is singular or too ill-conditioned to solve reliably."""


class RankDeficient(CovdetError, RuntimeError):
    """Random rows could not be orthonormalized after the allowed redraws."""


class DegenerateStatistic(CovdetError, ArithmeticError):
    """Decision statistic is undefined for the given input (e.g. zero diagonal)."""


class DomainError(CovdetError, ValueError):
    """Argument lies outside the mathematical domain of the function."""


class InsufficientTrials(CovdetError, ValueError):
    """Too few Monte Carlo trials for the requested estimate to be meaningful."""


class ConfigInvalid(CovdetError, ValueError):
    """Configuration is missing a key, ill-typed, or violates a constraint.

    ``key`` names the offending configuration entry so CLI diagnostics can
    point at it directly.
    """

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
