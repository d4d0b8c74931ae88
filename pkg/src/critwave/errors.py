"""Exception hierarchy shared by every critwave module."""


class CritwaveError(Exception):
    """Base class for all errors raised by critwave."""


class InvalidParameterError(CritwaveError, ValueError):
    """A parameter is outside its admissible range."""


class GridMismatchError(CritwaveError, ValueError):
    """Two objects that must share a radial grid do not."""


class DomainError(CritwaveError, ValueError):
    """A query falls outside the region covered by the data."""


class CoverageError(CritwaveError, ValueError):
    """A record or profile does not cover the requested times or window."""


class ResolutionError(CritwaveError, ValueError):
    """The grid is too coarse to resolve the requested feature."""


class NumericError(CritwaveError, ArithmeticError):
    """Non-finite values appeared during a computation."""


class PreconditionError(CritwaveError, ValueError):
    """Input violates a stated hypothesis of the operation."""


class InconsistencyError(CritwaveError, RuntimeError):
    """A diagnostic produced values that contradict a structural property.

    Parameters
    ----------
    message : str
        Human readable description.
    times : sequence of float, optional
        Times at which the inconsistency was observed.
    """

    def __init__(self, message, times=()):
        super().__init__(message)
        self.times = tuple(float(t) for t in times)


class ConfigError(CritwaveError, ValueError):
    """A scenario or command-line configuration could not be parsed."""
