"""Exception types shared across the package."""


class AndersonBandError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(AndersonBandError, ValueError):
    pass


class NotHyperbolicError(AndersonBandError, ValueError):
    pass


class DegenerateRowError(AndersonBandError, ArithmeticError):
    pass


class SingularPointError(AndersonBandError, ZeroDivisionError):
    pass


class BudgetError(AndersonBandError, RuntimeError):
    """Raised when a word enumeration would exceed its product budget."""


class ConstructionError(AndersonBandError, RuntimeError):
    """A cone that must exist could not be built (indicates a bug or bad input)."""


class InvariantViolation(AndersonBandError, AssertionError):
    """A structural guarantee (e.g. which eigenvectors may coincide) was violated."""
