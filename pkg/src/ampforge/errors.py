"""Exception hierarchy shared across the package."""


class AmpForgeError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatch(AmpForgeError):
    """Tensor shapes are incompatible with the requested operation."""


class NumericalFailure(AmpForgeError):
    """A backend decomposition failed to converge."""


class NotHermitian(AmpForgeError):
    """Matrix fails the Hermiticity pre-check."""


class NotUnitary(AmpForgeError):
    """Matrix fails the unitarity pre-check."""


class NotDensityMatrix(AmpForgeError):
    """Matrix is not Hermitian, unit-trace and positive semidefinite."""


class TooLarge(AmpForgeError):
    """Problem size exceeds the configured dense-simulation cap."""


class SizeMismatch(AmpForgeError):
    """Operands describe systems of different sizes."""


class WindowOutOfRange(AmpForgeError):
    """Requested site window does not fit inside the chain."""


class IndexOutOfRange(AmpForgeError):
    """Gate addresses a qubit outside the register."""


class DimensionMismatch(AmpForgeError):
    """Input dimensions do not match the model or image geometry."""


class EmptyBatch(AmpForgeError):
    """An operation that averages over a batch received no samples."""


class AllZeroInput(AmpForgeError):
    """Input vector has zero norm and cannot be encoded."""


class UndecomposedBlock(AmpForgeError):
    """Circuit still contains raw two-qubit unitary blocks."""


class ParseError(AmpForgeError):
    """Malformed input file.

    Carries ``row`` and ``column`` (1-based) of the offending token when known.
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + loc)


class IoError(AmpForgeError):
    """File could not be read or written."""


class DidNotConverge(AmpForgeError):
    """Disentangling hit the sweep limit before the fidelity target.

    The partial result is still usable; it is attached as ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
