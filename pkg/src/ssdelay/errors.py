"""Exception hierarchy shared by every module."""

from __future__ import annotations


class SSDelayError(Exception):
    """Base class for all errors raised by ssdelay."""


class ConfigurationError(SSDelayError, ValueError):
    """Invalid parameters, step settings or malformed input files."""


class DomainError(ConfigurationError):
    """A formula was evaluated outside the parameter range where it is defined."""


class DivergenceError(SSDelayError, FloatingPointError):
    """The integrated state left the divergence guard or became non-finite."""

    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t


class NumericalError(SSDelayError, RuntimeError):
    """A root bracket or iteration failed where it was expected to succeed."""


class PoleError(NumericalError):
    """Transfer function evaluated at (or numerically on top of) a pole."""


class GapViolationError(NumericalError):
    """A characteristic root lies on the line Re p = -nu0."""


class ScanInconsistencyError(SSDelayError, RuntimeError):
    """Bisection predicates were not monotone inside the bracket."""

    def __init__(self, message: str, samples=None):
        super().__init__(message)
        self.samples = list(samples or [])


class ContinuationBreakError(SSDelayError, RuntimeError):
    """The tracked periodic orbit was lost during a parameter continuation."""

    def __init__(self, message: str, epsilon: float):
        super().__init__(message)
        self.epsilon = epsilon
