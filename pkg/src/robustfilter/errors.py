"""Exception hierarchy shared by the numerical modules and the CLI."""

from __future__ import annotations


class RobustFilterError(Exception):
    """Base class for all library errors."""


class ValidationError(RobustFilterError, ValueError):
    """Invalid input: bad shapes, out-of-range parameters, inadmissible classes."""


class MinimalityError(RobustFilterError, ArithmeticError):
    """The minimality condition fails: ``1/(f+g)`` is not integrable on the grid."""

    def __init__(self, message: str, frequency: float | None = None):
        super().__init__(message)
        self.frequency = frequency


class FactorizationDomainError(MinimalityError):
    """A density handed to the factorizer is not strictly positive."""


class ConvergenceError(RobustFilterError, RuntimeError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message: str, residual: float | None = None, iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class FactorizationError(ConvergenceError):
    """The truncated factor does not reproduce its target within tolerance."""


class ConsistencyError(RobustFilterError, RuntimeError):
    """An internal invariant (e.g. causality of a characteristic) is violated."""


class IllConditionedWarning(RuntimeWarning):
    """Emitted when a linear solve falls back to least squares."""
