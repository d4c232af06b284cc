"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class StratError(Exception):
    """Base class for every library error."""


class DomainError(StratError, ValueError):
    """A point or argument lies outside the domain of an operation."""


class NonConvergenceError(StratError, RuntimeError):
    """An iterative method (integrator, Newton) exceeded its budget."""


class EscapeError(StratError, RuntimeError):
    """A flow left its domain before the requested time.

    ``exit_time`` is the last accepted time inside the domain.
    """

    def __init__(self, message: str, exit_time: float):
        super().__init__(f"{message} (exit time {exit_time:.6g})")
        self.exit_time = exit_time


class UncoveredPointError(StratError, ValueError):
    """Partition of unity evaluated where every raw bump vanishes."""


class InvalidActionError(StratError, ValueError):
    """A group action is malformed (non-orthogonal, non-symplectic, too large)."""


class PreconditionError(StratError, ValueError):
    """An operation was called without its documented precondition."""


class NotConvenientError(StratError, RuntimeError):
    """A cut-off field failed the numerical convenience test."""


class NotASubmersionError(StratError, ValueError):
    """A map has deficient rank on a stratum tangent space."""


class OutsideTubularError(StratError, ValueError):
    """``mult(0, v)`` or a projection was requested off the tubular."""


class BuildError(StratError, RuntimeError):
    """A control-data builder could not complete."""


class EquivarianceDefectError(StratError, RuntimeError):
    """Reduced structure is not well defined; carries a witness pair."""

    def __init__(self, message: str, witness: tuple):
        super().__init__(message)
        self.witness = witness


class ConfigError(StratError, ValueError):
    """Invalid run configuration."""
