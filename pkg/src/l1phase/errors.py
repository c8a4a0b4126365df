"""Exception hierarchy shared across the package."""


class L1PhaseError(Exception):
    """Base class for all package errors."""


class ParameterError(L1PhaseError, ValueError):
    """An argument lies outside the documented domain."""


class NoRootError(L1PhaseError):
    """Bracket expansion failed to find a sign change.

    The last bracket tried is kept on ``bracket`` for diagnostics.
    """

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class DegeneracyError(L1PhaseError):
    """A least-squares design is rank deficient."""


class FactorizationError(L1PhaseError):
    """A matrix that must be positive definite failed to factorize."""


class DomainError(L1PhaseError):
    """No real solution exists in the supported search region."""


class CampaignError(L1PhaseError):
    """Too many Monte Carlo trials had unconverged solves."""
