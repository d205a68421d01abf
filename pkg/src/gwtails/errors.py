"""Exception hierarchy shared across the package."""


class GwTailsError(Exception):
    """Base class for all package errors."""


class BadParam(GwTailsError):
    """A parameter is outside its admissible range."""


class SubcriticalMean(GwTailsError):
    """Offspring mean is <= 1; the process would not be supercritical."""


class BadPmf(GwTailsError):
    """A finite pmf specification is invalid (negative mass, bad sum, ...)."""


class TailZero(GwTailsError):
    """Tail value underflowed to zero where a positive value is required."""


class ConditionalTailEmpty(GwTailsError):
    """Conditioning event {xi > t} has zero numeric probability."""


class PopulationOverflow(GwTailsError):
    """A generation size would exceed the 63-bit integer limit."""


class Overflow(GwTailsError):
    """Exponent guard tripped in an exponential-moment evaluation."""


class NoConvergence(GwTailsError):
    """An iterative summation failed to converge within its term budget."""


class QuadratureFailure(GwTailsError):
    """Adaptive quadrature could not reach the requested tolerance."""


class NonIntegrableTail(GwTailsError):
    """A tail integral diverges (numerically) on the requested range."""


class TooLarge(GwTailsError):
    """Exact computation was requested beyond its feasibility guard."""


class ParseError(GwTailsError):
    """A config or law specification string could not be parsed."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class UnknownField(GwTailsError):
    """A config file contains a field that is not part of the schema."""
