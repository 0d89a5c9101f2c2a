"""Exception hierarchy.

Every error raised on bad input derives from ``DomainError`` so callers
(and the CLI, which maps it to exit code 1) can catch one type.
"""


class SkolabError(Exception):
    """Base class for all package errors."""


class DomainError(SkolabError, ValueError):
    """Input is well-formed but violates a mathematical precondition."""


class NonMonotoneTimes(DomainError):
    pass


class DimensionMismatch(DomainError):
    pass


class NonFiniteValue(DomainError):
    pass


class HorizonExceeded(DomainError):
    pass


class HorizonMismatch(DomainError):
    pass


class OutOfHorizon(DomainError):
    pass


class RefinementTooSmall(DomainError):
    pass


class BadParameter(DomainError):
    pass


class UnknownId(DomainError):
    pass


class UnknownConstruction(UnknownId):
    pass


class MissingInternals(DomainError):
    pass


class NotUncorrelated(DomainError):
    pass


class InvalidRep(DomainError):
    pass


class InsufficientData(DomainError):
    pass


class SinkError(SkolabError, OSError):
    pass


class NotFittedError(SkolabError, AttributeError):
    pass
