"""Exception types shared across the package."""


class SafeHybridError(Exception):
    """Base class for all package errors."""


class ConfigError(SafeHybridError):
    """Malformed or inconsistent configuration."""


class NoValidMode(SafeHybridError):
    """Continuous state left its mode's domain with no guard firing."""


class AmbiguousEvent(SafeHybridError):
    """Two guards fired at the same localized instant, or event chattering
    exceeded the per-step cap."""


class DegenerateConstraint(SafeHybridError):
    """Reset map annihilates the constrained output (C·M = 0)."""


class InvalidBuffer(SafeHybridError):
    """Buffer geometry violates its invariants (e.g. d̃ ≤ y_min for a
    relative-degree-2 buffer)."""


class IllConditioned(SafeHybridError):
    """Least-squares system for the affine surrogate is rank deficient."""


class NonFiniteDynamics(SafeHybridError):
    """Dynamics evaluation returned NaN or inf."""


class StepTooLarge(SafeHybridError):
    """Finite-difference h-refinement consistency check failed."""


class Divergence(SafeHybridError):
    """Critic values blew up during training."""


class NonFiniteLoss(SafeHybridError):
    """NaN or inf encountered in a training loss."""


class CertificateUnreachable(SafeHybridError):
    """Stage-2 training exhausted its epoch budget with unsatisfied vertices."""
