"""Fields on a truncated half-plane grid and the operators acting on them.

Storage is row-major with x outer and y inner: ``values[ix, iy]`` is the
sample at ``(grid.x[ix], grid.y[iy])``. Vector potentials carry
contravariant components (A^x, A^y); the magnetic field is the coefficient
B_z of dx^dy, obtained from the lowered one-form A_i = g_ij A^j.
"""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import _stencils
from .errors import DomainError
from .geometry import HalfPlanePoint, christoffel_array, metric_arrays, metric_at


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.y_min > 0:
            raise DomainError(f"y_min={self.y_min} must be > 0")
        if not self.x_min < self.x_max:
            raise ValueError(f"x_min={self.x_min} must be < x_max={self.x_max}")
        if not self.y_min < self.y_max:
            raise ValueError(f"y_min={self.y_min} must be < y_max={self.y_max}")
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid needs at least 4x4 nodes, got {self.nx}x{self.ny}")

    @property
    def hx(self):
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def hy(self):
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def x(self):
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def y(self):
        return np.linspace(self.y_min, self.y_max, self.ny)

    @property
    def shape(self):
        return (self.nx, self.ny)

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    def refined(self, factor: float) -> Grid:
        """Grid with about ``factor`` times smaller spacing.

        For integer factors the spacing is exactly ``factor`` times smaller
        and the nodes include ours.
        """
        if not factor >= 1:
            raise ValueError(f"refinement factor {factor} must be >= 1")
        return Grid(
            self.x_min,
            self.x_max,
            self.y_min,
            self.y_max,
            round(factor * (self.nx - 1)) + 1,
            round(factor * (self.ny - 1)) + 1,
        )

    def contains(self, x, y):
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


class ScalarField:
    """Immutable grid samples of a scalar."""

    def __init__(self, grid: Grid, values):
        values = np.array(values, dtype=float).reshape(grid.shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("ScalarField values must be finite")
        values.flags.writeable = False
        self.grid = grid
        self.values = values

    def __repr__(self):
        return f"ScalarField({self.grid.nx}x{self.grid.ny}, max|v|={np.abs(self.values).max():.3g})"

    def __mul__(self, c):
        return ScalarField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __add__(self, other):
        _same_grid(self.grid, other.grid)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self.grid, other.grid)
        return ScalarField(self.grid, self.values - other.values)

    def at(self, x, y):
        """Bilinear interpolation; exact at nodes."""
        if not self.grid.contains(x, y):
            raise DomainError(f"({x}, {y}) outside grid bounds")
        interp = RegularGridInterpolator((self.grid.x, self.grid.y), self.values)
        return float(interp([[x, y]])[0])


@dataclass(frozen=True)
class VectorPotentialField:
    grid: Grid
    ax: ScalarField
    ay: ScalarField

    def __post_init__(self):
        _same_grid(self.grid, self.ax.grid)
        _same_grid(self.grid, self.ay.grid)

    @classmethod
    def from_arrays(cls, grid, ax, ay):
        return cls(grid, ScalarField(grid, ax), ScalarField(grid, ay))

    @classmethod
    def from_functions(cls, grid, fx, fy):
        """Sample ``fx(X, Y)`` and ``fy(X, Y)`` on the grid mesh."""
        X, Y = grid.mesh()
        return cls.from_arrays(
            grid, np.broadcast_to(fx(X, Y), grid.shape), np.broadcast_to(fy(X, Y), grid.shape)
        )

    @classmethod
    def zeros(cls, grid):
        return cls.from_arrays(grid, np.zeros(grid.shape), np.zeros(grid.shape))

    def stacked(self):
        """Components as one (2, nx, ny) array."""
        return np.stack([self.ax.values, self.ay.values])

    def __mul__(self, c):
        return VectorPotentialField(self.grid, self.ax * c, self.ay * c)

    __rmul__ = __mul__

    def __add__(self, other):
        return VectorPotentialField(self.grid, self.ax + other.ax, self.ay + other.ay)


@dataclass(frozen=True)
class MagneticTwoForm:
    grid: Grid
    bz: ScalarField

    @classmethod
    def from_array(cls, grid, bz):
        return cls(grid, ScalarField(grid, bz))

    @classmethod
    def uniform_reference(cls, grid):
        """The uniform reference field B0 = y^-2 dx^dy."""
        _, Y = grid.mesh()
        return cls.from_array(grid, 1.0 / Y**2)


def _same_grid(g1, g2):
    if g1 != g2:
        raise ValueError("fields live on different grids")


@functools.lru_cache(maxsize=16)
def grid_geometry(grid: Grid):
    """Broadcast (sqrt_g, g_inv, Gamma) samples on the grid; Gamma has shape (2, 2, 2, nx, ny)."""
    sqrt_g, g_inv = metric_arrays(grid.y)
    gam = christoffel_array(grid.y)
    shape = grid.shape
    return (
        np.broadcast_to(sqrt_g, shape),
        np.broadcast_to(g_inv, shape),
        np.broadcast_to(gam[:, :, :, None, :], (2, 2, 2) + shape),
    )


def integrate_with_volume(grid: Grid, values) -> float:
    """Trapezoidal integral of ``values`` against mu = sqrt(g) dx dy."""
    sqrt_g, _, _ = grid_geometry(grid)
    inner = np.trapezoid(np.asarray(values) * sqrt_g, grid.y, axis=1)
    return float(np.trapezoid(inner, grid.x))


def lower_index(a: VectorPotentialField, p: HalfPlanePoint):
    """(A_x, A_y) = g_ij A^j at ``p``."""
    g = metric_at(p)
    return g.g11 * a.ax.at(p.x, p.y), g.g22 * a.ay.at(p.x, p.y)


def exterior_derivative(a: VectorPotentialField) -> MagneticTwoForm:
    """B_z = d_x A_y - d_y A_x of the lowered one-form."""
    grid = a.grid
    sqrt_g, _, _ = grid_geometry(grid)
    # conformal metric: g_11 = g_22 = sqrt(g)
    lower_x = sqrt_g * a.ax.values
    lower_y = sqrt_g * a.ay.values
    bz = _stencils.d1(lower_y, grid.hx, 0) - _stencils.d1(lower_x, grid.hy, 1)
    return MagneticTwoForm.from_array(grid, bz)


def covariant_divergence(a: VectorPotentialField) -> ScalarField:
    """d_x(sqrt(g) A^x) + d_y(sqrt(g) A^y), without the 1/sqrt(g) prefactor."""
    grid = a.grid
    sqrt_g, _, _ = grid_geometry(grid)
    div = _stencils.d1(sqrt_g * a.ax.values, grid.hx, 0) + _stencils.d1(
        sqrt_g * a.ay.values, grid.hy, 1
    )
    return ScalarField(grid, div)


@functools.lru_cache(maxsize=16)
def laplacian_coefficients(grid: Grid):
    """Coefficients of the rough (connection) Laplacian A^{i;k}_{;k}.

    Expands
        [g^jk (A^i_,k + G^i_lk A^l)]_,j
        + g^jl G^i_kj (A^k_,l + G^k_lm A^m)
        + g^kl G^j_kj (A^i_,l + G^i_lm A^m)
    with the product rule, for the conformal metric g^jk = g_inv delta^jk.
    The metric depends on y only, so the coefficients are returned with a
    single x column, shape (5, 2, 2, 1, ny). Partials of the metric-derived
    coefficients along y are finite differences on the grid.
    """
    _, g_inv = metric_arrays(grid.y)
    gam = christoffel_array(grid.y)
    coef = np.zeros((_stencils.N_DERIV, 2, 2, 1, grid.ny))
    first = (1, 2)   # index of d_x, d_y
    second = (3, 4)  # index of d_xx, d_yy

    def dj(arr, j):
        if j == 0:
            return np.zeros_like(arr)
        return _stencils.d1(arr, grid.hy, 0)

    for i in range(2):
        for j in range(2):
            # first bracket, product rule
            coef[first[j], i, i] += dj(g_inv, j)
            coef[second[j], i, i] += g_inv
            for l in range(2):
                coef[0, i, l] += dj(g_inv * gam[i, l, j], j)
                coef[first[j], i, l] += g_inv * gam[i, l, j]
            # second bracket
            for k in range(2):
                coef[first[j], i, k] += g_inv * gam[i, k, j]
                for m in range(2):
                    coef[0, i, m] += g_inv * gam[i, k, j] * gam[k, j, m]
        # third bracket
        for k in range(2):
            trace = gam[0, k, 0] + gam[1, k, 1]
            coef[first[k], i, i] += g_inv * trace
            for m in range(2):
                coef[0, i, m] += g_inv * trace * gam[i, k, m]
    return np.ascontiguousarray(coef)


_COMPONENT = {"x": 0, "y": 1, 0: 0, 1: 1}


def _component_index(component):
    try:
        return _COMPONENT[component]
    except KeyError:
        raise ValueError(f"component must be 'x' or 'y', got {component!r}") from None


def covariant_laplacian(a: VectorPotentialField, component) -> ScalarField:
    c = _component_index(component)
    grid = a.grid
    out = _stencils.apply(a.stacked(), laplacian_coefficients(grid), grid.hx, grid.hy)
    return ScalarField(grid, out[c])


def eigenmode_check(a: VectorPotentialField, lam: float, component) -> ScalarField:
    """Residual Lap A^i + lam^2 A^i; zero where A is a -lam^2 eigenmode."""
    c = _component_index(component)
    comp = a.ax if c == 0 else a.ay
    return covariant_laplacian(a, c) + lam**2 * comp


def write_field_csv(path, field: ScalarField):
    """CSV ``x,y,value`` in storage order, 17 significant digits."""
    grid = field.grid
    with open(path, "w", newline="") as fh:
        fh.write("x,y,value\n")
        for ix, x in enumerate(grid.x):
            for iy, y in enumerate(grid.y):
                fh.write(f"{x:.17g},{y:.17g},{field.values[ix, iy]:.17g}\n")


def read_field_csv(path) -> ScalarField:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["x", "y", "value"]:
            raise ValueError(f"unexpected header {header}")
        rows = np.array([[float(v) for v in row] for row in reader])
    xs = np.unique(rows[:, 0])
    ys = np.unique(rows[:, 1])
    grid = Grid(xs[0], xs[-1], ys[0], ys[-1], len(xs), len(ys))
    return ScalarField(grid, rows[:, 2].reshape(grid.shape))
