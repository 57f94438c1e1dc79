"""Exception types shared across the package."""


class PhibvpError(Exception):
    """Base class for package errors."""


class DomainError(PhibvpError):
    """An argument lies outside the admissible domain (e.g. a derivative
    sample at or beyond the operator's singular radius)."""


class ConvergenceError(PhibvpError):
    """An iterative solver hit its cap without meeting its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class Infeasible(PhibvpError):
    """The requested endpoint data cannot be attained by any admissible
    function (the endpoint gap meets or exceeds the reachable span T*a).

    Attributes
    ----------
    gap : float
        |y - x| - T*a, the amount by which the request misses feasibility
        (>= 0 up to the feasibility margin).
    """

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class UnsupportedError(PhibvpError):
    """The operation is not defined for the given variant (documented
    limitation, e.g. first-eigenvalue reduction for a finite strip)."""


class ConfigError(PhibvpError):
    """A run configuration is malformed; the message names the field."""
