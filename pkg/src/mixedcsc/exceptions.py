"""Exception types raised by mixedcsc."""


class CSCError(Exception):
    """Base class for all package errors."""


class DimensionError(CSCError, ValueError):
    """Array shapes are inconsistent with each other."""

    def __init__(self, what, shape_a, shape_b):
        self.shape_a = tuple(shape_a)
        self.shape_b = tuple(shape_b)
        super().__init__(f"{what}: shape {self.shape_a} incompatible with "
                         f"shape {self.shape_b}")


class FormatError(CSCError, ValueError):
    """A file does not conform to the expected binary format."""


class ConditioningError(CSCError, ArithmeticError):
    """A per-frequency solve hit a vanishing denominator."""


class SolverError(CSCError, RuntimeError):
    """An iterative solver produced non-finite iterates."""
