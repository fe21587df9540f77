"""Exception types shared across the auditing toolkit."""

from __future__ import annotations


class AuditError(Exception):
    """Base class for errors raised by this package."""


class TrainingError(AuditError, RuntimeError):
    """The variational objective diverged (NaN/inf) during critic training."""

    def __init__(self, message: str, epoch: int, direction: str | None = None):
        super().__init__(message)
        self.epoch = epoch
        self.direction = direction


class InfeasibleError(AuditError, ValueError):
    """A requested target cannot be met (no root in bracket, unreachable radius)."""


class ConstructionError(AuditError, RuntimeError):
    """A combinatorial construction stalled before reaching its minimum size."""

    def __init__(self, message: str, attempts: int):
        super().__init__(message)
        self.attempts = attempts
