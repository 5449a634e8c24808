"""Exception hierarchy shared by every emlab module."""


class EmlabError(Exception):
    """Base class for all errors raised by emlab."""


class ValidationError(EmlabError, ValueError):
    """An object violates one of its structural invariants.

    ``invariant`` names the violated property so front ends can report it.
    """

    def __init__(self, message, invariant=None):
        super().__init__(message)
        self.invariant = invariant


class LabelError(ValidationError):
    """Unknown, duplicated or mismatched factor labels."""

    def __init__(self, message):
        super().__init__(message, invariant="labels")


class DimensionError(ValidationError):
    """Shapes or dimensions do not agree, or a dimension cap is exceeded."""

    def __init__(self, message):
        super().__init__(message, invariant="dimensions")


class EmptySupportError(EmlabError, ValueError):
    """The operator has no numerically nonzero eigenvalue."""


class NumericalError(EmlabError, ArithmeticError):
    """A numerical routine failed to meet its contract."""
