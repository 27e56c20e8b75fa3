"""Exception types raised across the package."""


class EqForwardError(Exception):
    """Base class for all package errors."""


class ParseError(EqForwardError, ValueError):
    pass


class DimensionError(EqForwardError, ValueError):
    pass


class EmptySample(EqForwardError, ValueError):
    pass


class KindMismatch(EqForwardError, ValueError):
    pass


class ConfigError(EqForwardError, ValueError):
    pass


class TopologyError(EqForwardError, ValueError):
    pass


class NoBracket(EqForwardError):
    """Excess supply does not change sign over the requested price interval."""


class NumericalBreakdown(EqForwardError, ArithmeticError):
    """The simplex basis became singular or a post-solve check failed."""
