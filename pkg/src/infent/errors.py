"""Exception types raised across the package."""


class InfentError(Exception):
    """Base class for all errors raised by this package."""


class SizeError(InfentError, ValueError):
    """An operation would exceed the configured dense-matrix size cap."""


class PreconditionError(InfentError, ValueError):
    """An input violates the documented precondition of an operation."""


class NotCyclicError(PreconditionError):
    """A vector state is not cyclic (rank-deficient coefficient matrix)."""


class UnsupportedError(InfentError):
    """The requested operation is not defined for this input."""


class TruncationError(InfentError, ValueError):
    """The requested tolerance is below the analytic truncation tail."""


class ExtentTooSmallError(InfentError, ValueError):
    """A grid does not hold the requested wavefunction."""
