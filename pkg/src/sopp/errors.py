"""Exception types raised by the library."""


class SoppError(Exception):
    """Base class for all library errors."""


class InvalidInputError(SoppError, ValueError):
    pass


class DegenerateChannelError(SoppError, ValueError):
    """A channel with zero success probability where a positive one is required."""


class SingularityError(SoppError, ArithmeticError):
    pass


class UnsupportedConfigurationError(SoppError):
    """Analysis requested for a configuration with no closed form (e.g. N >= 4)."""
