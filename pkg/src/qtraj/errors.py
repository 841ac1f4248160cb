"""Exception hierarchy.

Every error raised by the library derives from :class:`QtrajError`. The
two intermediate classes map onto CLI exit codes: input problems exit with
1, numerical failures with 2.
"""


class QtrajError(Exception):
    """Base class for all library errors."""


class InputError(QtrajError):
    """Invalid user input (shapes, states, configuration)."""


class NumericalError(QtrajError):
    """A numerical procedure failed or produced an untrustworthy result."""


# linear algebra / system model
class NonHermitianInput(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class NonHermitianHamiltonian(InputError):
    pass


class TraceViolation(InputError):
    pass


class NotPositive(InputError):
    pass


class NotHermitian(InputError):
    pass


class NotAProjector(InputError):
    pass


class WeightNormalization(InputError):
    pass


class UnknownObservable(InputError):
    pass


# configuration
class ParseError(InputError):
    def __init__(self, message, line=None, field=None):
        super().__init__(message)
        self.line = line
        self.field = field


class ValidationError(InputError):
    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


# numerics
class ConvergenceFailure(NumericalError):
    pass


class StepRejected(NumericalError):
    pass


class DtTooLarge(NumericalError):
    pass


class DegenerateBlock(NumericalError):
    pass


class BudgetExceeded(NumericalError):
    pass
