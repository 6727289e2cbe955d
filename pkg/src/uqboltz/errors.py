"""Exception types raised across the package."""


class UqBoltzError(Exception):
    """Base class for all package errors."""


class DomainError(UqBoltzError, ValueError):
    """Argument outside the admissible domain (negative radius, L < R, ...)."""


class InputError(UqBoltzError, ValueError):
    """Non-finite or otherwise unusable input data."""


class UsageError(UqBoltzError, ValueError):
    """Incompatible objects combined (domain mismatch, order mismatch)."""


class AssumptionViolation(UqBoltzError):
    """A kernel or initial-data assumption failed a numerical check."""


class QuadraturePrecisionError(UqBoltzError):
    """Quadrature refinement changed a computed quantity by more than the tolerance."""

    def __init__(self, message, index=None, change=None):
        super().__init__(message)
        self.index = index
        self.change = change


class CapabilityError(UqBoltzError):
    """Requested quantity cannot be resolved by the given discretization."""


class CacheMismatchError(UqBoltzError):
    """Weight cache on disk does not match the requested configuration."""


class BlowUpError(UqBoltzError):
    """Time integration produced non-finite coefficients.

    ``t`` is the time of the failing step, ``norm`` the last finite L2 norm and
    ``trajectory`` (when available) holds every snapshot recorded before the failure.
    """

    def __init__(self, message, t=None, norm=None, trajectory=None):
        super().__init__(message)
        self.t = t
        self.norm = norm
        self.trajectory = trajectory
