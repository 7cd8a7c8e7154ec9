"""Exception types raised across the library.

Every error that callers are expected to handle derives from GndError, so a
bare ``except GndError`` catches any contract violation raised by this
package without swallowing genuine bugs (TypeError and friends).
"""


class GndError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(GndError):
    """Operands have incompatible shapes for the requested operation."""


class ZeroDegreeRow(GndError):
    """A row of the matrix being normalized has no entries.

    Degree normalization divides by row sums; a zero row usually means
    self-loops were not added before normalizing.
    """


class NonFiniteValue(GndError):
    """A NaN or Inf appeared where only finite values are allowed."""


class NonScalarLoss(GndError):
    """backward() was called on a node that is not a 1x1 matrix."""


class EmptyMask(GndError):
    """A vertex mask selects no vertices."""


class InvalidParameter(GndError):
    """A numeric configuration value is outside its legal range."""


class InsufficientVertices(GndError):
    """The graph has too few (labeled) vertices to build the requested split."""


class ParseError(GndError):
    """A dataset file could not be parsed.

    Carries the file path and 1-based line number of the offending line.
    """

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class InconsistentVertexCount(GndError):
    """Dataset files disagree about the number of vertices."""


class UnknownLabel(GndError):
    """A label value outside {-1, 0, 1, ...} was encountered."""


class NotFitted(GndError):
    """predict() was called on an estimator before fit()."""


class ConfigError(GndError):
    """A run-spec file violates the documented schema."""
