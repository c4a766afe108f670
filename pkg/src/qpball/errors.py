"""Exception hierarchy shared by every module."""


class QpballError(Exception):
    """Base class for library errors."""


class DomainError(QpballError, ValueError):
    """An argument lies outside the domain of an operation."""


class PoleError(QpballError, ArithmeticError):
    """Evaluation hit a singularity (pole of G, kernel singularity)."""


class ContractError(QpballError, ValueError):
    """A precondition of an operation's contract is violated."""


class ResolutionError(QpballError, RuntimeError):
    """A sampler cannot resolve the requested region at the given budget."""


class IntegrationError(QpballError, RuntimeError):
    """A Monte-Carlo integral excluded too many sample points."""
