"""Exception types shared across the package."""


class DualctlError(Exception):
    """Base class for package-specific errors."""


class InfeasibleStateError(DualctlError):
    """Every hypothesis of an information state is -inf (no feasible history)."""


class InfeasibleObservationError(InfeasibleStateError):
    """An observation is inconsistent with every hypothesis transition."""


class ResourceLimitError(DualctlError):
    """An enumeration or horizon cap would be exceeded."""


class PolicyFaultError(DualctlError):
    """A policy emitted a non-finite control."""


class DivergenceError(DualctlError):
    """Closed-loop state magnitude exceeded the divergence guard.

    Carries the partial trajectory recorded before the guard tripped.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class GridStateError(DualctlError):
    """A value grid is not in the state required by the operation."""
