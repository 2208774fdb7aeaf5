"""Exception hierarchy.

``ValidationError`` subclasses describe bad input (CLI exit code 2),
``NumericalError`` subclasses describe breakdown during a computation
(CLI exit code 3).
"""


class MopucError(Exception):
    pass


class ValidationError(MopucError, ValueError):
    pass


class NumericalError(MopucError, ArithmeticError):
    pass


class ParseError(ValidationError):
    pass


class NotHermitian(ValidationError):
    pass


class DimMismatch(ValidationError):
    pass


class NotNonnegative(ValidationError):
    pass


class NotNormalized(ValidationError):
    pass


class NyquistViolation(ValidationError):
    pass


class OffGridAngle(ValidationError):
    pass


class NotContractive(ValidationError):
    """An input parameter has spectral norm >= 1."""


class NotPositiveDefinite(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class NonContractive(NumericalError):
    """The moment recursion produced a parameter with norm >= 1 (breakdown)."""


class ToeplitzNotPD(NumericalError):
    pass
