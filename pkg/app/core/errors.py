"""Exception hierarchy for the demand-model library.

Every error carries the process exit code the CLI reports for it, so command
handlers can translate failures without a lookup table.
"""


class DemandModelError(Exception):
    """Base class for all library failures."""

    exit_code: int = 3


class InvalidParameterError(DemandModelError, ValueError):
    """Family or combinator parameters violate the model assumptions."""

    exit_code = 2


class SpecError(DemandModelError):
    """A DistributionSpec document or a config override could not be parsed."""

    exit_code = 2


class InverseMismatchError(DemandModelError):
    """A monotone transform's inverse does not round-trip on the check grid."""

    exit_code = 2


class DomainError(DemandModelError, ValueError):
    """A function was evaluated outside the prices where it is defined."""


class DivergentIntegralError(DemandModelError):
    """A tail integral (mean, moment) does not converge."""


class QuadratureError(DemandModelError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class BracketError(DemandModelError):
    """No bracket could be found for a root or quantile."""


class BeyondSupportError(DemandModelError):
    """The survival function underflowed; the price is beyond numerical support."""


class StepTooSmallError(DemandModelError):
    """A finite difference lost its significant digits to cancellation."""


class TooFewPointsError(DemandModelError):
    """Not enough grid samples for a monotonicity verdict."""


class MissingDensityError(DemandModelError):
    """The operation needs a density the distribution does not expose."""

    exit_code = 5


class NoFiniteMaximizerError(DemandModelError):
    """Expected revenue keeps rising up to the numerical horizon."""

    exit_code = 4


class ValidationFailedError(DemandModelError):
    """At least one Monte-Carlo check failed."""

    exit_code = 6
