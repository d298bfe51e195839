"""Closed-form dynamo solutions on the half-plane.

Two families:

* force-free: A^x = A0 exp(gamma t + k_sep y^-2), A^y = A0 y^2 exp(-eta lambda^2 t),
  gamma = v0 k_sep - lambda^2 eta, flow v = v0 y^2 d/dy;
* forced: A^x = y^2 exp(x (gamma/y - v0/y^2) + gamma t), A^y = 0, flow v = v0 d/dx.

``k_sep`` is a separation constant, not the Gaussian curvature (which is -1).
Scalar evaluators take a HalfPlanePoint; the ``sample_*`` helpers evaluate
the same expressions on coordinate arrays for grids and boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateParameterError, DomainError, RangeError
from .geometry import HalfPlanePoint, christoffel_at

MAX_EXPONENT = 700.0


@dataclass(frozen=True)
class ForceFreeParams:
    a0: float = 1.0
    k_sep: float = 1.0
    lam: float = 1.0
    eta: float = 0.1
    v0: float = 2.0

    def __post_init__(self):
        for name in ("a0", "k_sep", "lam", "eta", "v0"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.eta < 0:
            raise ValueError(f"eta={self.eta} must be >= 0")

    @property
    def gamma(self):
        return growth_rate(self)


@dataclass(frozen=True)
class ForcedParams:
    gamma: float = -1.0
    v0: float = -2.0
    eta: float = 0.1

    def __post_init__(self):
        for name in ("gamma", "v0", "eta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.eta < 0:
            raise ValueError(f"eta={self.eta} must be >= 0")

    @property
    def gamma_is_negative(self):
        """The slow-dynamo regime; positive gamma is accepted but flagged by callers."""
        return self.gamma < 0


@dataclass(frozen=True)
class ReversalLine:
    y0: float
    physical: bool


def _exp(arg):
    arg = np.asarray(arg, dtype=float)
    if np.any(np.abs(arg) > MAX_EXPONENT):
        raise RangeError(f"exponent {np.max(np.abs(arg)):.4g} exceeds {MAX_EXPONENT}")
    return np.exp(arg)


def _positive(y):
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise DomainError("y must be > 0")
    return y


def growth_rate(p: ForceFreeParams) -> float:
    return p.v0 * p.k_sep - p.lam**2 * p.eta


# --- force-free family ---------------------------------------------------


def sample_force_free_potential(x, y, t, params: ForceFreeParams):
    y = _positive(y)
    shape = np.broadcast(x, y).shape
    ax = params.a0 * _exp(growth_rate(params) * t + params.k_sep / y**2)
    ay = params.a0 * y**2 * _exp(-params.eta * params.lam**2 * t)
    return np.broadcast_to(ax, shape), np.broadcast_to(ay, shape)


def sample_force_free_bz(x, y, t, params: ForceFreeParams):
    """2 A0 (-2 y^-3 + y^-4)(sinh(K y^-2) + cosh(K y^-2)) e^(gamma t)."""
    y = _positive(y)
    bracket = -2.0 / y**3 + 1.0 / y**4
    bz = 2.0 * params.a0 * bracket * _exp(params.k_sep / y**2 + growth_rate(params) * t)
    return np.broadcast_to(bz, np.broadcast(x, y).shape)


def force_free_potential(p: HalfPlanePoint, t: float, params: ForceFreeParams):
    ax, ay = sample_force_free_potential(p.x, p.y, t, params)
    return float(ax), float(ay)


def force_free_bz(p: HalfPlanePoint, t: float, params: ForceFreeParams) -> float:
    return float(sample_force_free_bz(p.x, p.y, t, params))


def reversal_line_force_free() -> float:
    """Root of -2 y^-1 + y^-2 (equivalently of -2 y^-3 + y^-4)."""
    return 0.5


# --- forced family ----------------------------------------------------------


def sample_forced_potential(x, y, t, params: ForcedParams):
    y = _positive(y)
    x = np.asarray(x, dtype=float)
    arg = x * (params.gamma / y - params.v0 / y**2) + params.gamma * t
    return y**2 * _exp(arg)


def sample_forced_bz(x, y, t, params: ForcedParams):
    """2 y^-2 x A (gamma - v0 / (2 y)), with A the forced potential value."""
    y = _positive(y)
    x = np.asarray(x, dtype=float)
    a = sample_forced_potential(x, y, t, params)
    return 2.0 / y**2 * x * a * (params.gamma - 0.5 * params.v0 / y)


def forced_potential(p: HalfPlanePoint, t: float, params: ForcedParams) -> float:
    return float(sample_forced_potential(p.x, p.y, t, params))


def forced_bz(p: HalfPlanePoint, t: float, params: ForcedParams) -> float:
    return float(sample_forced_bz(p.x, p.y, t, params))


def reversal_line_forced(params: ForcedParams) -> ReversalLine:
    if params.gamma == 0:
        raise DegenerateParameterError("gamma = 0: no reversal line")
    y0 = params.v0 / (2.0 * params.gamma)
    return ReversalLine(y0=y0, physical=y0 > 0)


def sample_potential(x, y, t, params):
    """(A^x, A^y) arrays for either family."""
    if isinstance(params, ForceFreeParams):
        return sample_force_free_potential(x, y, t, params)
    if isinstance(params, ForcedParams):
        ax = sample_forced_potential(x, y, t, params)
        return ax, np.zeros_like(ax)
    raise TypeError(f"unknown parameter family {type(params).__name__}")


def sample_bz(x, y, t, params):
    if isinstance(params, ForceFreeParams):
        return sample_force_free_bz(x, y, t, params)
    if isinstance(params, ForcedParams):
        return sample_forced_bz(x, y, t, params)
    raise TypeError(f"unknown parameter family {type(params).__name__}")


# --- non-geodesic flow and geodesic deviation ------------------------------

# (V^y(y), dV^y/dy) for the supported vertical profiles
VY_PROFILES = {
    "y_squared": (lambda y: y * y, lambda y: 2.0 * y),
    "zero": (lambda y: 0.0, lambda y: 0.0),
}

RESIDUAL_MODES = ("chain_rule", "arc_length")


def nongeodesic_residual(y, vy_profile="y_squared", force_claimed=None, mode="chain_rule"):
    """dV^y/ds + Gamma^2_22 (V^y)^2 - F(y) along a vertical flow line.

    ``chain_rule`` reads d/ds as V^y d/dy (s the flow parameter);
    ``arc_length`` takes s as hyperbolic arc length, so dy/ds = y.
    ``force_claimed`` defaults to the restoring force F = -y.
    """
    gamma_y_yy = christoffel_at(HalfPlanePoint(0.0, y)).gamma_y_yy
    try:
        v, dv = VY_PROFILES[vy_profile]
    except KeyError:
        raise ValueError(f"unknown profile {vy_profile!r}") from None
    if mode == "chain_rule":
        dy_ds = v(y)
    elif mode == "arc_length":
        dy_ds = y
    else:
        raise ValueError(f"mode must be one of {RESIDUAL_MODES}")
    lhs = dv(y) * dy_ds + gamma_y_yy * v(y) ** 2
    force = -y if force_claimed is None else force_claimed
    return lhs - force


def deviation_solution(s, j0):
    """J(s) = J0 sinh(sqrt(-K) s) with K = -1."""
    return j0 * np.sinh(s)
