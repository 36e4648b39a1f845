"""Exception hierarchy.

Three top-level categories map onto the CLI exit codes and the HTTP error
responses of the service: ``ParseError`` (a model document could not be
read), ``ValidationError`` (inputs are structurally wrong for the requested
operation) and ``NumericalError`` (the computation itself failed).
"""


class ItmorError(Exception):
    """Base class for all library errors."""


class ParseError(ItmorError):
    """A model document is malformed (bad JSON, wrong keys, wrong types)."""


class ValidationError(ItmorError):
    """An input violates a structural precondition."""


class NumericalError(ItmorError):
    """A numerical computation failed or is undefined for the input."""


# -- validation subtypes -----------------------------------------------------

class DimensionMismatch(ValidationError):
    """Matrix or vector shapes are mutually inconsistent."""


class IndexOutOfRange(ValidationError):
    """A state index falls outside [0, m)."""


class LengthMismatch(ValidationError):
    """A vector has the wrong number of entries."""


class InvalidSubset(ValidationError):
    """A state subset is empty, improper or otherwise unusable here."""


class InvalidSize(ValidationError):
    """A combination size k is outside 0 < k < m."""


class DegenerateOutput(ValidationError):
    """The output map cancels (c1 + c2 = 0 in the scalar two-state form)."""


# -- numerical subtypes ------------------------------------------------------

class Unstable(NumericalError):
    """The transition matrix has spectral radius >= 1 where stability is required."""


class NoConvergence(NumericalError):
    """An iterative solver hit its cap before reaching tolerance."""


class SingularInnovation(NumericalError):
    """The innovation covariance C P C^T + R is singular."""


class SingularCovariance(NumericalError):
    """A covariance matrix that must be positive definite is not."""


class SingularGramian(NumericalError):
    """A gramian that must be positive definite is singular."""


class SingularTargetNoise(NumericalError):
    """The noise covariance of the target state block is singular."""


class BoundsUndefined(NumericalError):
    """The analytic crossing bounds involve the log of a non-positive number."""
