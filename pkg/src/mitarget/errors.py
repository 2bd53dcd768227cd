"""Exception hierarchy.

Two families matter to callers (and to the CLI exit codes):

* ``ValidationError`` -- bad configuration or malformed input (exit 2).
* ``DegenerateError`` -- the numbers themselves do not support the request,
  e.g. a singular background covariance or bags that carry no signal (exit 4).
"""


class MitargetError(Exception):
    """Base class for all package errors."""


class ValidationError(MitargetError, ValueError):
    """Invalid configuration or input. ``problems`` lists each violation."""

    def __init__(self, message, problems=None):
        self.problems = list(problems) if problems else [message]
        super().__init__(message)


class DimensionMismatchError(ValidationError):
    pass


class FormatError(ValidationError):
    """A data file could not be parsed."""


class DegenerateError(MitargetError, ArithmeticError):
    """Input is well formed but numerically degenerate."""


class ConfigurationError(DegenerateError):
    """E.g. training without positive or negative bags, or k-means with K > N."""


class InsufficientDataError(DegenerateError):
    pass


class SingularCovarianceError(DegenerateError):
    def __init__(self, message, eigenvalue=None):
        self.eigenvalue = eigenvalue
        super().__init__(message)


class ZeroVectorError(DegenerateError):
    """Instance coincides with the background mean, so it has no direction."""


class ZeroSignatureError(DegenerateError):
    pass


class DegenerateUpdateError(DegenerateError):
    """Positive selected mean equals the negative mean; the update has no direction."""


class NoValidCandidateError(DegenerateError):
    pass


class DegenerateLabelsError(DegenerateError):
    """Scores carry a single class, so ROC/AUC is undefined."""


class NonFiniteGradientError(DegenerateError):
    pass


class GenerationError(DegenerateError):
    """Random construction could not satisfy its constraints."""
