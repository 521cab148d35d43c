"""Exception hierarchy shared across the package."""


class MonosmoothError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(MonosmoothError):
    """Invalid problem input (bad abscissae, weights, bounds, ...)."""


class InfeasibleIntervalError(MonosmoothError):
    """No monotone curve exists for the requested interval boundary data.

    Raised for a three-segment interval with zero rise but positive end
    slopes; the minimal bending energy diverges there.
    """


class SplineFormatError(MonosmoothError):
    """Malformed serialized spline document."""


class OracleError(MonosmoothError):
    """The discretized-QP oracle failed to certify a solution."""
