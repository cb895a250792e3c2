"""Exception types shared across the package."""


class DegenerateFilterError(RuntimeError):
    """All particle weights vanished at some time step.

    Attributes
    ----------
    t: int
        1-based time index at which every particle received zero weight.
    """

    def __init__(self, t):
        self.t = t
        super().__init__(f"all particle weights are zero at time t={t}")


class DegenerateBackwardKernelError(RuntimeError):
    """No transition mass from any previous particle to some new particle."""

    def __init__(self, t, j):
        self.t = t
        self.j = j
        super().__init__(
            f"backward kernel degenerate at time t={t} for particle j={j}"
        )


class DivergenceError(RuntimeError):
    """Leapfrog integration produced a non-finite state or exploding energy.

    Attributes
    ----------
    step: int
        leapfrog step index (1-based) at which the divergence occurred.
    """

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"leapfrog diverged at step {step}")


class UndefinedAcfError(ValueError):
    """Autocorrelation requested for a constant series (zero variance)."""
