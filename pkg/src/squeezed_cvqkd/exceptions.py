"""Exception hierarchy shared across the package."""


class QKDError(Exception):
    """Base class for all package errors."""


class DomainError(QKDError, ValueError):
    """An argument lies outside the domain where the model is defined."""


class NonSymmetric(DomainError):
    pass


class Unphysical(QKDError):
    """A covariance matrix violates the uncertainty principle."""


class DegenerateMeasurement(QKDError):
    pass


class SingularModulation(DomainError):
    """Zero x-modulation makes the entanglement-based mapping singular."""


class AllocationOutOfRange(DomainError):
    pass


class NumericalFailure(QKDError, ArithmeticError):
    pass


class EvaluationFailure(NumericalFailure):
    """The objective could not be evaluated on most of the search grid."""


class NoPositiveKey(QKDError):
    pass


class BracketingFailure(NumericalFailure):
    pass
