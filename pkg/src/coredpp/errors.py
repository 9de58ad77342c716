"""Exception hierarchy.

Three broad families matter to callers (and to the CLI exit codes):
usage errors, data errors, and numeric errors. Everything derives from
``CoreDppError`` so library users can catch one base class.
"""


class CoreDppError(Exception):
    """Base class for all library errors."""


class UsageError(CoreDppError):
    """Invalid parameter combination supplied by the caller."""


class DataError(CoreDppError):
    """Malformed input data or model file."""


class NumericError(CoreDppError):
    """Numerical precondition violated (singularity, degeneracy, non-PSD)."""


# -- kernel / linear algebra -------------------------------------------------

class NotPSD(NumericError):
    """Kernel fails the positive-semidefiniteness or positive-diagonal check."""


class InvalidBandwidth(UsageError):
    """RBF bandwidth must be a finite positive number."""


class KOutOfRange(UsageError):
    """Requested subset size k outside the valid range."""


class IndexOutOfRange(UsageError):
    """A ground-set index is negative or >= n."""


class DuplicateIndex(UsageError):
    """An index subset contains a repeated index."""


class SingularPivot(NumericError):
    """Conditioning pivot too close to zero."""


class NegativeRadicand(NumericError):
    """Squared kernel distance came out negative beyond roundoff tolerance."""


# -- models ------------------------------------------------------------------

class DegenerateModel(NumericError):
    """Normalizer underflowed to ~0; the kernel has rank below k."""


class WrongCardinality(UsageError):
    """Query subset does not have the model's cardinality k."""


class TooManyParts(UsageError):
    """Requested more parts than ground-set points."""


class EmptyPartViolation(CoreDppError):
    """A partition operation would leave a part empty (never raised by
    ``construct``, which skips such moves; kept for direct partition edits)."""


# -- diagnostics -------------------------------------------------------------

class EnumerationTooLarge(UsageError):
    """Exact enumeration would exceed the configured budget."""


class DegenerateConditional(NumericError):
    """A conditioned determinant denominator is ~0; the positivity assumption
    on all k-subset probabilities is violated."""


# -- baselines ---------------------------------------------------------------

class InsufficientChains(UsageError):
    """The convergence diagnostic needs at least two equal-length chains."""


# -- IO ----------------------------------------------------------------------

class ParseError(DataError):
    """Malformed CSV or model file; message names the offending line."""
