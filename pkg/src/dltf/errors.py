"""Exception types shared across the library.

Everything raised on purpose derives from DltfError so callers can catch
library failures without also swallowing programming errors.
"""


class DltfError(Exception):
    """Base class for all library-specific errors."""


class DimensionMismatch(DltfError):
    """Operands have incompatible shapes."""


class ZeroColumn(DltfError):
    """A column with (near-)zero norm cannot be normalized."""


class InvalidK(DltfError):
    """Sparsity level outside the valid range for the operand."""


class NonpositiveWeight(DltfError):
    """Isotonic regression weights must be strictly positive."""


class UnsortedInput(DltfError):
    """Input that must be nondecreasing is not."""


class NegativeInput(DltfError):
    """Input that must be entrywise nonnegative is not."""


class TooFewAtoms(DltfError):
    """Coherence needs at least two atoms."""


class AllZeroCode(DltfError):
    """A recovery condition is undefined for the all-zero code."""


class BudgetExceeded(DltfError):
    """Exhaustive enumeration would exceed the subset budget."""


class DeltaOutOfRange(DltfError):
    """Isometry constant outside the range the bound is proved for."""


class DenominatorNonpositive(DltfError):
    """The norm lower bound's denominator is not positive."""


class PowerIterationDiverged(DltfError):
    """Power iteration produced a non-finite or non-positive estimate."""


class LineSearchFailed(RuntimeWarning):
    """Backtracking exhausted its budget; the step is skipped, not fatal."""


class SingularSubproblem(DltfError):
    """A least-squares subproblem is too ill-conditioned to solve."""


class FileFormatError(DltfError):
    """A serialized container is truncated or malformed."""
