"""Shared exception types for the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit-specific failures."""


class ConfigError(ToolkitError):
    """Invalid or inconsistent run configuration."""


class SingularFieldError(ToolkitError):
    """Velocity field evaluated inside its declared singular region."""


class ZeroVelocityError(ToolkitError):
    """Division by a vanishing velocity component."""


class DimensionCapError(ToolkitError):
    """Fock-space dimension exceeds the configured desk-scale cap."""


class BoundaryStencilError(ToolkitError):
    """Derivative stencil requested at an open-boundary edge site."""


class CapExceededError(ToolkitError):
    """Combinatorial cap (particles/modes) exceeded."""


class InsufficientSamplesError(ToolkitError):
    """Too few Monte Carlo samples for the requested estimate."""


class NumericalError(ToolkitError):
    """Generic numerical failure (non-convergence, ill-conditioning)."""


class ToleranceError(ToolkitError):
    """A cross-validation discrepancy exceeded its stated tolerance."""


class ExtrapolationWarning(UserWarning):
    """Small-velocity limit extrapolation inconsistent with linear behavior."""
