"""Exception hierarchy shared by all csmlab modules."""


class CSMError(Exception):
    """Base class for every error raised by csmlab."""


class ShapeError(CSMError, ValueError):
    """Operand shapes or site dimensions do not fit together."""


class CapacityError(CSMError, ValueError):
    """A dense object would exceed the configured maximum dimension."""


class NumericError(CSMError, ArithmeticError):
    """A numerical routine failed to converge or met non-finite input."""


class ValidationError(CSMError, ValueError):
    """An object violates one of its defining invariants (norm, unitarity, ...)."""


class TruncationError(NumericError):
    """A Fock-space truncation leaves more tail mass than the allowed budget.

    ``required_n_max`` is the smallest cutoff that would satisfy the budget.
    """

    def __init__(self, message, required_n_max=None):
        super().__init__(message)
        self.required_n_max = required_n_max
