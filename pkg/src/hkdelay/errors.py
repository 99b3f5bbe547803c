"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class HKDelayError(Exception):
    """Base class for every error raised by hkdelay."""


class InvalidArgumentError(HKDelayError, ValueError):
    pass


class OutOfRangeError(InvalidArgumentError):
    """A time lies outside the interval on which a trajectory is defined."""


class ConfigurationError(InvalidArgumentError):
    pass


class UnsupportedInputError(InvalidArgumentError):
    """Input is valid mathematically but outside what the solver handles exactly."""


class DivergenceError(HKDelayError, ArithmeticError):
    """The integrated state stopped being finite."""

    def __init__(self, t: float, message: str | None = None):
        self.t = float(t)
        super().__init__(message or f"non-finite state encountered at t={self.t:.6g}")
