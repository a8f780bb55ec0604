"""Exception types shared across the package.

Raised conditions map onto the CLI exit codes: configuration problems
surface as ``ConfigError`` (exit 3), runtime numerical guards as
``NumericalGuardError`` subclasses (exit 4).
"""


class ImpulseKitError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(ImpulseKitError):
    """Invalid parameters, schemas, or declarative scenario configs."""


class GridMismatchError(ImpulseKitError):
    """Two fields were combined that do not live on the same grid."""


class TailClippingError(ImpulseKitError):
    """A state or density does not decay below tolerance at the domain edge."""


class DegenerateDensityError(ImpulseKitError):
    """A density violates the assumptions of a transport construction.

    Typical cause: an interior interval of zero mass, which makes the
    monotone rearrangement ill-defined there.
    """


class ConvexityError(ImpulseKitError):
    """A map failed the gradient-of-convex certificate."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class NumericalGuardError(ImpulseKitError):
    """Base class for runtime guards tripped during numerical work."""


class ConvergenceError(NumericalGuardError):
    """An iterative solve (Newton inversion, refinement loop) did not converge."""


class StabilityError(NumericalGuardError):
    """A propagation left its validated regime (norm drift, step guard)."""


class MassLeakError(NumericalGuardError):
    """Probability mass reached the edge of a periodic simulation box."""


class SupportEscapeError(NumericalGuardError):
    """A transported support left the sampled domain."""


class ResourceGuardError(NumericalGuardError):
    """Projected cost of a requested computation exceeds the configured budget."""
