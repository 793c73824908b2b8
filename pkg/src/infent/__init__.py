"""Numerical models of one-copy entanglement, EPR doubles and their finite shadows."""
from .errors import (
    ExtentTooSmallError,
    InfentError,
    NotCyclicError,
    PreconditionError,
    SizeError,
    TruncationError,
    UnsupportedError,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ExtentTooSmallError",
    "InfentError",
    "NotCyclicError",
    "PreconditionError",
    "SizeError",
    "TruncationError",
    "UnsupportedError",
]
