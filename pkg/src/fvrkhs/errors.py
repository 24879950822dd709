"""Exception hierarchy shared by every fvrkhs module.

The CLI maps these onto process exit codes, so library code should raise
the most specific class that applies.
"""


class FvrkhsError(Exception):
    """Base class for all library errors."""


class DimensionError(FvrkhsError, ValueError):
    """Array shapes do not line up."""


class ConfigurationError(FvrkhsError, ValueError):
    """A configuration value is invalid or inconsistent."""


class DomainError(FvrkhsError, ValueError):
    """A point lies outside the domain a function is defined on."""


class UsageError(FvrkhsError, RuntimeError):
    """An API was called in a way it does not support."""


class FormatError(FvrkhsError, ValueError):
    """A dataset or checkpoint file is malformed."""


class NumericalError(FvrkhsError, ArithmeticError):
    """A computation produced NaN/Inf or violated a stability bound."""


class KindMismatchError(FormatError):
    """A checkpoint holds a different model kind or input dimension than requested."""
