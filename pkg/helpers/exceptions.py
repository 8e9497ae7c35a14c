"""Domain errors raised by the numerics, on top of the shared RPA error types"""

from mbu_rpa_core.exceptions import BusinessError, ProcessError


class ValidationError(BusinessError):
    """A precondition or constructor invariant was violated."""


class TrivialWeightError(BusinessError):
    """A weight vanishes where the characteristic needs it to be positive."""


class EmptyFamilyError(BusinessError):
    """A supremum was requested over an empty rectangle family."""


class FitError(BusinessError):
    """Too few usable entries for a decay fit."""


class CheckFailure(BusinessError):
    """An acceptance check did not hold."""


class GuardExceededError(ProcessError):
    """The grid is too large for an O(N^4) evaluation."""


class NotInAnyConeError(ValidationError):
    """A pair with a vanishing factor distance belongs to no cone."""
