"""Kinematic dynamo numerics on the upper half-plane with the hyperbolic metric."""

from .analytic import (
    ForcedParams,
    ForceFreeParams,
    ReversalLine,
    force_free_bz,
    force_free_potential,
    forced_bz,
    forced_potential,
    growth_rate,
    nongeodesic_residual,
    reversal_line_force_free,
    reversal_line_forced,
)
from .diagnostics import (
    EntropyCheck,
    GrowthFit,
    entropy_bound_check,
    fit_growth_rate,
    integrate_deviation,
    magnetic_energy,
    reversal_scan,
)
from .errors import (
    ConfigError,
    DegenerateFitError,
    DegenerateParameterError,
    DomainError,
    InstabilityError,
    RangeError,
    StabilityBoundError,
)
from .fields import (
    Grid,
    MagneticTwoForm,
    ScalarField,
    VectorPotentialField,
    covariant_divergence,
    covariant_laplacian,
    exterior_derivative,
)
from .geometry import (
    HalfPlanePoint,
    christoffel_at,
    gaussian_curvature_at,
    gaussian_curvature_fd,
    metric_at,
    riemann_1212_at,
)
from .solver import FlowField, RunResult, SolverConfig, run, stability_bound, step

__version__ = "0.1.0"
