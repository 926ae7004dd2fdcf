"""Exception types shared across the package."""


class QuenchlabError(Exception):
    """Base class for all package errors."""


class InvalidParameters(QuenchlabError, ValueError):
    """A parameter set violates its invariants."""


class RegularizationRequired(QuenchlabError, ValueError):
    """The discrete energy is not differentiable for the requested (delta, eps)."""


class InsufficientResolution(QuenchlabError):
    """The grid cannot resolve the requested radii, scales or rescalings."""


class UndefinedFit(QuenchlabError):
    """A log-log fit has fewer than two nonzero samples."""


class EmptyPhase(QuenchlabError):
    """The requested phase never meets the measurement balls."""


class NonConvergence(QuenchlabError):
    """Iteration budget exhausted before the tolerances were met.

    The best iterate is available as ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DegenerateEvaluationWarning(UserWarning):
    """The right-hand side was regularized at nodes with ``|u| < eps``."""
