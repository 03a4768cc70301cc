"""Exception types shared across the package."""


class BoxPhaseError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(BoxPhaseError, ValueError):
    """A physical or numerical parameter violates its documented constraint."""


class ContractError(BoxPhaseError, ValueError):
    """A caller broke an API contract (mismatched shapes, straddled breakpoints...)."""


class NumericFailureError(BoxPhaseError, RuntimeError):
    """A quadrature or linear-algebra routine failed to reach its tolerance."""

    def __init__(self, message, achieved=None, requested=None):
        super().__init__(message)
        self.achieved = achieved
        self.requested = requested


class RegimeError(BoxPhaseError, RuntimeError):
    """An analysis refused to run because its physical regime is not certified."""


class ConfigError(BoxPhaseError, ValueError):
    """Experiment configuration is malformed or contradictory."""
