"""Exception hierarchy.

Validation problems (bad inputs, bad parameters, regime mismatches) derive
from :class:`ValidationError`; numerical breakdowns derive from
:class:`NumericalError`. The CLI maps the first family to exit code 2 and the
second to exit code 3.
"""


class OpdLabError(Exception):
    """Base class for all package errors."""


class ValidationError(OpdLabError, ValueError):
    """Caller supplied something outside the documented domain."""


class NumericalError(OpdLabError, ArithmeticError):
    """A computation could not be carried out reliably."""


class InvalidInputError(ValidationError):
    """Malformed data: wrong length, non-finite entries, empty arrays."""


class InvalidParameterError(ValidationError):
    """A scalar parameter lies outside its admissible range."""


class UnsupportedOrderError(ValidationError):
    """Pattern or polynomial order beyond the supported guard."""


class RegimeError(ValidationError):
    """Memory parameter incompatible with the requested limit regime."""


class AssumptionError(ValidationError):
    """Model violates a structural assumption of the limit theory."""


class GenerationError(NumericalError):
    """Circulant embedding produced a materially negative eigenvalue."""


class ModelInconsistencyError(NumericalError):
    """Assembled covariance matrix is not positive semidefinite."""


class ConditioningError(NumericalError):
    """Matrix too ill-conditioned to invert."""


class DegenerateMarginalsError(NumericalError):
    """Pattern distributions are (numerically) concentrated on one pattern."""
