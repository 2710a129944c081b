"""Exception types raised across the package."""


class BiasCorrError(Exception):
    """Base class for all package errors."""


class ConfigurationError(BiasCorrError, ValueError):
    """Invalid model, scorer or experiment configuration."""


class ShapeError(BiasCorrError, ValueError):
    """Array dimensions do not match what the operation expects."""


class UsageError(BiasCorrError, RuntimeError):
    """An object was used outside its contract (empty batch, reused tape...)."""


class NumericError(BiasCorrError, FloatingPointError):
    """Non-finite values where finite ones are required."""


class DomainError(BiasCorrError, ValueError):
    """An argument lies outside its mathematical domain."""


class PreconditionError(BiasCorrError, ValueError):
    """A documented precondition on the data does not hold."""


class DegeneracyError(BiasCorrError, ArithmeticError):
    """A distribution has zero total mass and cannot be normalized."""
