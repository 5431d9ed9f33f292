"""Exception types shared across the library."""


class InvalidVelocityError(ValueError):
    """Three-velocity magnitude at or above the speed of light."""


class RealizabilityError(RuntimeError):
    """A moment state left the realizable cone where it must not."""


class NonConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap.

    Carries the worst residual seen at the cap and, when available,
    context describing where in phase space the failure happened.
    """

    def __init__(self, message, residual=None, context=None):
        super().__init__(message)
        self.residual = residual
        self.context = context or {}


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""
