"""Exception types shared across the package.

The CLI maps these onto process exit codes: ``DataError`` -> 2,
``NumericalError`` -> 3.
"""


class DataError(ValueError):
    """Input data violates a precondition (too short, negative, misaligned...)."""


class NumericalError(ArithmeticError):
    """A computation broke down numerically (singular system, non-finite filter)."""


class SingularityError(NumericalError):
    """A linear system or recursion denominator is (numerically) singular."""
