"""Exception hierarchy shared by all localdyn modules."""


class LocalDynError(Exception):
    """Base class for every error raised by localdyn."""


class FieldMismatchError(LocalDynError, TypeError):
    """Two values from different number fields were combined."""


class InvalidInputError(LocalDynError, ValueError):
    pass


class ContractViolation(LocalDynError, ValueError):
    """A documented precondition (e.g. a 'small' step) does not hold."""


class InvalidAutomorphismError(LocalDynError, ValueError):
    pass


class NotConjugableError(LocalDynError):
    """The flow is not invertible in t and no explicit conjugate was given."""


class EvaluationError(LocalDynError, ArithmeticError):
    """An observable or integrator produced a non-finite value."""


class UnsupportedStateSpace(LocalDynError, TypeError):
    pass


class InvalidMetricError(LocalDynError, ValueError):
    pass


class GeodesicIntegrationError(EvaluationError):
    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class InvalidSystemError(LocalDynError, ValueError):
    pass


class InvalidDistributionError(LocalDynError, ValueError):
    pass
