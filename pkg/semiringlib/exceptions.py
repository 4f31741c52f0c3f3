"""Exception types raised by SemiringLib.

Index
-----
.. currentmodule:: semiringlib.exceptions
.. autosummary::
    ShapeError
    EmptyReductionError
    NonFiniteError
    NonFiniteGradientError
    NonFiniteLossError
    ConfigError
    DataFormatError

API
---
.. autoexception:: ShapeError
.. autoexception:: EmptyReductionError
.. autoexception:: NonFiniteError
.. autoexception:: NonFiniteGradientError
.. autoexception:: NonFiniteLossError
.. autoexception:: ConfigError
.. autoexception:: DataFormatError

"""

__all__ = [
    'ShapeError', 'EmptyReductionError', 'NonFiniteError', 'NonFiniteGradientError',
    'NonFiniteLossError', 'ConfigError', 'DataFormatError'
]


class ShapeError(ValueError):
    """Raised when the shapes of two or more operands do not conform."""


class EmptyReductionError(ValueError):
    """Raised when a semiring fold is applied to zero elements."""


class NonFiniteError(ArithmeticError):
    """Base class for errors caused by NaN or infinite values."""


class NonFiniteGradientError(NonFiniteError):
    """Raised by the optimizer upon encountering a NaN or infinite gradient."""


class NonFiniteLossError(NonFiniteError):
    """Raised when a training step produces a NaN or infinite loss."""


class ConfigError(ValueError):
    """Raised for missing, unknown or malformed configuration keys."""


class DataFormatError(ValueError):
    """Raised when a data file cannot be parsed."""
