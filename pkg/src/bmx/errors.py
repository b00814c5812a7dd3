"""Exception hierarchy shared by all bmx modules."""


class BmxError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatch(BmxError):
    """Operand shapes are incompatible for the requested operation."""


class SpecMismatch(BmxError):
    """Operands do not share the same inner-product specification."""


class RankDeficient(BmxError):
    """A column became numerically dependent during orthogonalization."""


class ZeroMatrix(BmxError):
    """The operation is undefined for an identically zero matrix."""


class OutOfBounds(BmxError):
    """An index or index set lies outside the matrix extent."""


class BadRank(BmxError):
    """A requested truncation rank is outside the admissible range."""


class PivotBreakdown(BmxError):
    """Elimination hit a pivot entry with a vanishing norm."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"pivot breakdown at elimination step {step}")


class ZeroPivot(BmxError):
    """The selected pivot entry has (numerically) zero norm."""


class ZeroBlock(BmxError):
    """The selected row/column intersection block is identically zero."""


class SpawnFailure(BmxError):
    """The oracle subprocess could not be started."""


class ProtocolError(BmxError):
    """The oracle wire exchange violated the line protocol."""


class OracleError(BmxError):
    """The oracle answered with ok=false; carries its error message."""


class BadGramFile(BmxError):
    """The sidecar Gram-matrix file is missing, malformed, or not SPD."""


class LengthMismatch(BmxError):
    """A coefficient vector from the wire has the wrong length."""
