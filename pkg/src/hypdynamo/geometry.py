"""Differential geometry of the Lobachevsky (Poincare upper half-) plane.

Metric ds^2 = y^-2 (dx^2 + dy^2) on {(x, y) : y > 0}. Index 0 <-> x, 1 <-> y
in arrays; the named fields use the 1 <-> x, 2 <-> y convention.

Closed forms here are authoritative. ``gaussian_curvature_fd`` is an
independent finite-difference check and is not used by the solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from .errors import DomainError

DEFAULT_MIN_Y = 1e-6


@dataclass(frozen=True)
class HalfPlanePoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError(f"non-finite coordinates ({self.x}, {self.y})")
        if self.y <= 0:
            raise DomainError(f"y={self.y} is not in the upper half-plane")


@dataclass(frozen=True)
class MetricSample:
    g11: float
    g22: float
    sqrt_g: float
    g_inv11: float
    g_inv22: float


@dataclass(frozen=True)
class ChristoffelSet:
    """Second-kind symbols Gamma^a_bc at one point.

    ``gamma_x_xy`` is Gamma^1_12, ``gamma_y_yy`` is Gamma^2_22 and so on.
    """

    gamma_x_xx: float
    gamma_x_xy: float
    gamma_x_yy: float
    gamma_y_xx: float
    gamma_y_xy: float
    gamma_y_yy: float

    @property
    def gamma_x_yx(self):
        return self.gamma_x_xy

    @property
    def gamma_y_yx(self):
        return self.gamma_y_xy

    def as_array(self):
        """Return G with G[a, b, c] = Gamma^a_bc (0 = x, 1 = y)."""
        return np.array(
            [
                [[self.gamma_x_xx, self.gamma_x_xy], [self.gamma_x_xy, self.gamma_x_yy]],
                [[self.gamma_y_xx, self.gamma_y_xy], [self.gamma_y_xy, self.gamma_y_yy]],
            ]
        )


def _check_y(y, min_y):
    if not y >= min_y:
        raise DomainError(f"y={y} below minimum admissible {min_y}")


def metric_at(p: HalfPlanePoint, *, min_y: float = DEFAULT_MIN_Y) -> MetricSample:
    _check_y(p.y, min_y)
    g = 1.0 / (p.y * p.y)
    ginv = p.y * p.y
    return MetricSample(g11=g, g22=g, sqrt_g=g, g_inv11=ginv, g_inv22=ginv)


def christoffel_at(p: HalfPlanePoint, *, min_y: float = DEFAULT_MIN_Y) -> ChristoffelSet:
    _check_y(p.y, min_y)
    inv = 1.0 / p.y
    return ChristoffelSet(
        gamma_x_xx=0.0,
        gamma_x_xy=-inv,
        gamma_x_yy=0.0,
        gamma_y_xx=inv,
        gamma_y_xy=0.0,
        gamma_y_yy=-inv,
    )


def riemann_1212_at(p: HalfPlanePoint, *, min_y: float = DEFAULT_MIN_Y) -> float:
    sqrt_g = metric_at(p, min_y=min_y).sqrt_g
    return -(sqrt_g * sqrt_g)


def gaussian_curvature_at(p: HalfPlanePoint, *, min_y: float = DEFAULT_MIN_Y) -> float:
    """K = R_1212 / det(g); identically -1."""
    sqrt_g = metric_at(p, min_y=min_y).sqrt_g
    return riemann_1212_at(p, min_y=min_y) / (sqrt_g * sqrt_g)


def gaussian_curvature_fd(p: HalfPlanePoint, h: float, *, min_y: float = DEFAULT_MIN_Y) -> float:
    """Curvature from finite differences of the conformal factor.

    For a metric lam^2 (dx^2 + dy^2), K = -Lap(ln lam) / lam^2 with Lap the
    flat Laplacian. The conformal factor is read off ``metric_at`` and the
    Laplacian uses the five-point-per-axis fourth-order central stencil, so
    the stencil reaches y - 2h.
    """
    if not h > 0:
        raise DomainError(f"step h={h} must be positive")
    if not p.y - 2 * h >= min_y:
        raise DomainError(f"stencil at y={p.y} with h={h} leaves the half-plane")

    def log_lam(x, y):
        return 0.5 * np.log(metric_at(HalfPlanePoint(x, y), min_y=min_y).g11)

    x, y = p.x, p.y
    c = log_lam(x, y)
    lap = 0.0
    for dx, dy in ((h, 0.0), (0.0, h)):
        f1 = log_lam(x + dx, y + dy) + log_lam(x - dx, y - dy)
        f2 = log_lam(x + 2 * dx, y + 2 * dy) + log_lam(x - 2 * dx, y - 2 * dy)
        lap += (16.0 * f1 - f2 - 30.0 * c) / (12.0 * h * h)
    return -lap / metric_at(p, min_y=min_y).g11


# Array versions used to sample the geometry on grids.


def metric_arrays(y):
    """(sqrt_g, g_inv) for a 1-D array of heights, from ``metric_at``."""
    samples = [metric_at(HalfPlanePoint(0.0, float(v))) for v in np.asarray(y, dtype=float)]
    return (
        np.array([m.sqrt_g for m in samples]),
        np.array([m.g_inv11 for m in samples]),
    )


def christoffel_array(y):
    """Gamma^a_bc for each entry of a 1-D array of heights; shape (2, 2, 2, n).

    Built pointwise from ``christoffel_at`` so grid operators share the
    closed forms exactly.
    """
    y = np.asarray(y, dtype=float)
    return np.stack(
        [christoffel_at(HalfPlanePoint(0.0, float(v))).as_array() for v in y], axis=-1
    )
