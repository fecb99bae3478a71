"""Exception hierarchy shared by all modules."""
from __future__ import annotations


class LienormError(Exception):
    """Base class for library errors."""


class AuxMismatchError(LienormError, ValueError):
    """Auxiliary parameters declared inconsistently."""


class NotInvertibleError(LienormError, ZeroDivisionError):
    pass


class ValidityError(LienormError, ArithmeticError):
    """The e-expansion ran out of precision (raise the e-order)."""


class DimensionError(LienormError, ValueError):
    pass


class ResonanceError(LienormError, ArithmeticError):
    """Division by a vanishing eigenvalue of ``ad`` of the linear part."""

    def __init__(self, message: str, terms=()):
        super().__init__(message)
        self.terms = list(terms)


class InvariantError(LienormError, AssertionError):
    """A checked postcondition failed; indicates a bug or bad input."""


class ParseError(LienormError, ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)
        self.line = line
        self.column = column
