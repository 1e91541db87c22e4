"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument violates a mathematical precondition (nonstationary point,
    frequency outside the allowed half-plane, invalid lag, ...)."""


class SingularityError(ArithmeticError):
    """A denominator in a resolvent or fixed-point formula is numerically zero."""


class NumericError(RuntimeError):
    """A numerical routine (eigensolver, optimizer) failed to produce a result."""


class ParseError(ValueError):
    """Malformed input file; the message carries the offending location."""
