"""
Exception types raised by gaussperc.

Input and precondition problems are ValueErrors; failed verifications and broken
deterministic invariants are RuntimeErrors. Everything also derives from
GaussPercError so callers can catch the package as a whole.
"""

from typing import Any, Optional


class GaussPercError(Exception):
    """Base class for all gaussperc errors."""


class UnsupportedOrderError(GaussPercError, ValueError):
    """Derivative order not available for this kernel family."""


class OutOfRangeError(GaussPercError, ValueError):
    """A radius, shell or ball falls outside the region where it is defined."""


class GridMismatchError(GaussPercError, ValueError):
    """Objects that must share a grid do not."""


class PreconditionError(GaussPercError, ValueError):
    """An operation's precondition does not hold."""

    def __init__(self, message: str, witness: Optional[Any] = None):
        super().__init__(message)
        self.witness = witness


class EmbeddingError(GaussPercError, ValueError):
    """Circulant embedding produced too much negative eigenvalue mass."""

    def __init__(self, message: str, most_negative_eigenvalue: float, suggested_padding: float):
        super().__init__(message)
        self.most_negative_eigenvalue = most_negative_eigenvalue
        self.suggested_padding = suggested_padding


class ShiftVerificationError(GaussPercError, RuntimeError):
    """A built shift failed its pointwise bounds on the verification grid."""

    def __init__(self, message: str, worst_vertex: tuple, worst_value: float):
        super().__init__(message)
        self.worst_vertex = worst_vertex
        self.worst_value = worst_value


class InvariantViolation(GaussPercError, RuntimeError):
    """A deterministic invariant failed. Always a bug in labeling or counting."""
