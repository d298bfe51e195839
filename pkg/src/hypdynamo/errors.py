"""Exception types shared across the package."""


class DomainError(ValueError):
    """A point or stencil falls outside the upper half-plane (or the grid)."""


class RangeError(OverflowError):
    """An exponent in a closed-form solution exceeds the representable range."""


class DegenerateParameterError(ValueError):
    """Parameters for which the requested quantity is undefined (e.g. gamma = 0)."""


class DegenerateFitError(ValueError):
    """Too few points, or non-positive samples, in a growth-rate fit window."""


class StabilityBoundError(ValueError):
    """Requested time step exceeds the explicit-scheme stability bound."""

    def __init__(self, dt, bound):
        super().__init__(f"dt={dt:.6g} exceeds stability bound {bound:.6g}")
        self.dt = dt
        self.bound = bound


class InstabilityError(RuntimeError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, step, time):
        super().__init__(f"non-finite field at step {step} (t={time:.6g})")
        self.step = step
        self.time = time


class ConfigError(ValueError):
    """Invalid or unparsable run configuration."""
