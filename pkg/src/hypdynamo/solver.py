"""Explicit time stepping of the component induction equation.

    d_t A^i = U_j (A^{i,j} - A^{j,i}) + s eta Lap A^i,    A^{i,j} = g^jk d_k A^i

with the connection Laplacian from :mod:`hypdynamo.fields`. ``s = +1`` for
the ``standard`` diffusion sign and ``-1`` for ``as_written``, which
moves the Laplacian to the right-hand side with the sign it carries next
to the time derivative (anti-diffusive, kept for the errata experiments).

The right-hand side is linear with steady coefficients, so it is assembled
once per configuration as a stencil coefficient array and applied each step.
"""

from __future__ import annotations

import dataclasses
import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import _stencils
from .analytic import ForcedParams, ForceFreeParams, sample_potential
from .errors import InstabilityError, StabilityBoundError
from .fields import (
    Grid,
    ScalarField,
    VectorPotentialField,
    covariant_divergence,
    exterior_derivative,
    grid_geometry,
    integrate_with_volume,
    laplacian_coefficients,
)

logger = logging.getLogger(__name__)

FLOW_KINDS = ("vertical_profile", "horizontal_constant", "custom")
DIFFUSION_SIGNS = ("standard", "as_written")
BOUNDARIES = ("dirichlet_analytic", "dirichlet_zero", "periodic_x_dirichlet_y")
SCHEMES = ("euler", "ssprk3")
VELOCITY_INDEX = ("lowered", "raw")


@dataclass(frozen=True)
class FlowField:
    """Steady prescribed flow, contravariant components (U^x, U^y).

    vertical_profile: U^y = v0 y^2; horizontal_constant: U^x = v0;
    custom: ``ux``/``uy`` sampled on the run grid.
    """

    kind: str = "vertical_profile"
    v0: float = 0.0
    ux: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    uy: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in FLOW_KINDS:
            raise ValueError(f"flow kind must be one of {FLOW_KINDS}, got {self.kind!r}")
        if not math.isfinite(self.v0):
            raise ValueError("flow amplitude must be finite")
        if self.kind == "custom" and (self.ux is None or self.uy is None):
            raise ValueError("custom flow needs sampled ux and uy")

    def contravariant(self, grid: Grid):
        X, Y = grid.mesh()
        zero = np.zeros(grid.shape)
        if self.kind == "vertical_profile":
            return zero, self.v0 * Y**2
        if self.kind == "horizontal_constant":
            return np.full(grid.shape, float(self.v0)), zero
        ux = np.broadcast_to(np.asarray(self.ux, dtype=float), grid.shape)
        uy = np.broadcast_to(np.asarray(self.uy, dtype=float), grid.shape)
        if not (np.all(np.isfinite(ux)) and np.all(np.isfinite(uy))):
            raise ValueError("custom flow must be finite on the grid")
        return ux, uy

    def is_zero(self, grid):
        ux, uy = self.contravariant(grid)
        return not (np.any(ux) or np.any(uy))


@dataclass(frozen=True)
class SolverConfig:
    grid: Grid
    dt: float
    t_end: float
    eta: float
    flow: FlowField = FlowField()
    diffusion_sign: str = "standard"
    boundary: str = "dirichlet_analytic"
    snapshot_every: int = 1
    family: Union[ForceFreeParams, ForcedParams, None] = None
    scheme: str = "euler"
    velocity_index: str = "lowered"

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt={self.dt} must be positive")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end={self.t_end} must be positive")
        if self.t_end < self.dt:
            raise ValueError(f"t_end={self.t_end} shorter than dt={self.dt}")
        if not (self.eta >= 0 and math.isfinite(self.eta)):
            raise ValueError(f"eta={self.eta} must be >= 0")
        for name, allowed in (
            ("diffusion_sign", DIFFUSION_SIGNS),
            ("boundary", BOUNDARIES),
            ("scheme", SCHEMES),
            ("velocity_index", VELOCITY_INDEX),
        ):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")
        if self.boundary == "dirichlet_analytic" and self.family is None:
            raise ValueError("dirichlet_analytic boundary needs an analytic family")

    @property
    def n_steps(self):
        return max(1, math.ceil(self.t_end / self.dt - 1e-9))

    @property
    def dt_used(self):
        return self.t_end / self.n_steps


@dataclass
class Snapshot:
    time: float
    potential: VectorPotentialField
    field: object  # MagneticTwoForm


@dataclass
class RunResult:
    times: np.ndarray
    field_l1_norms: np.ndarray
    energy: np.ndarray
    divergence_max: np.ndarray
    # max |div A| * min(hx, hy) / max |sqrt(g) A|: roundoff-sized for a solenoidal field
    divergence_rel: np.ndarray
    config_echo: SolverConfig
    snapshots: list = dataclasses.field(default_factory=list)
    final: Optional[VectorPotentialField] = None


# --- operator assembly ------------------------------------------------------


def _effective_velocity(grid, flow, velocity_index):
    """Components multiplying g^jk in U_j g^jk: U^j (lowered) or U^j g^jj (raw)."""
    ux, uy = flow.contravariant(grid)
    if velocity_index == "lowered":
        # U_j g^jk = g_jm U^m g^jk = U^k
        return ux, uy
    _, g_inv, _ = grid_geometry(grid)
    return ux * g_inv, uy * g_inv


def advection_coefficients(grid: Grid, flow: FlowField, velocity_index="lowered"):
    """Stencil coefficients of U_j (g^jk d_k A^i - g^ik d_k A^j)."""
    wx, wy = _effective_velocity(grid, flow, velocity_index)
    w = (wx, wy)
    first = (1, 2)
    coef = np.zeros((_stencils.N_DERIV, 2, 2) + grid.shape)
    for i in range(2):
        for j in range(2):
            coef[first[j], i, i] += w[j]
            coef[first[i], i, j] -= w[j]
    return coef


def advection_term(a: VectorPotentialField, flow: FlowField, velocity_index="lowered"):
    grid = a.grid
    out = _stencils.apply(a.stacked(), advection_coefficients(grid, flow, velocity_index), grid.hx, grid.hy)
    return ScalarField(grid, out[0]), ScalarField(grid, out[1])


def _operator(cfg: SolverConfig):
    if cfg.flow.kind == "custom":
        # sampled flows are excluded from hashing, so they bypass the cache
        return _assemble_operator(cfg)
    return _cached_operator(cfg)


@functools.lru_cache(maxsize=8)
def _cached_operator(cfg: SolverConfig):
    return _assemble_operator(cfg)


def _assemble_operator(cfg: SolverConfig):
    sign = 1.0 if cfg.diffusion_sign == "standard" else -1.0
    coef = advection_coefficients(cfg.grid, cfg.flow, cfg.velocity_index)
    if cfg.eta:
        coef = coef + sign * cfg.eta * laplacian_coefficients(cfg.grid)
    return _stencils.Operator(coef)


def stability_bound(cfg: SolverConfig) -> float:
    """Largest admissible dt; ``math.inf`` when nothing limits it.

    Diffusive limit h^2 / (4 eta g_inv_max), advective CFL h / |U|_max with
    h the smaller spacing. Forward Euler with central advection additionally
    needs dt <= 2 eta g_inv / |U|^2 at every node, and is refused outright
    for advection without diffusion.
    """
    grid = cfg.grid
    h = min(grid.hx, grid.hy)
    _, g_inv, _ = grid_geometry(grid)
    wx, wy = _effective_velocity(grid, cfg.flow, cfg.velocity_index)
    speed = np.hypot(wx, wy)
    bound = math.inf
    if cfg.eta > 0:
        bound = min(bound, h * h / (4.0 * cfg.eta * float(np.max(g_inv))))
    umax = float(np.max(speed))
    if umax > 0:
        bound = min(bound, h / umax)
        if cfg.scheme == "euler":
            if cfg.eta == 0:
                return 0.0
            moving = speed > 0
            bound = min(bound, float(np.min(2.0 * cfg.eta * g_inv[moving] / speed[moving] ** 2)))
    return bound


# --- boundary handling -------------------------------------------------------


class _Boundary:
    def __init__(self, cfg: SolverConfig):
        grid = cfg.grid
        self.cfg = cfg
        self.periodic_x = cfg.boundary == "periodic_x_dirichlet_y"
        mask = np.zeros(grid.shape, dtype=bool)
        mask[:, 0] = mask[:, -1] = True
        if not self.periodic_x:
            mask[0, :] = mask[-1, :] = True
        self.mask = mask
        X, Y = grid.mesh()
        self.xb = X[mask]
        self.yb = Y[mask]
        self.analytic = cfg.family is not None and cfg.boundary != "dirichlet_zero"

    def apply(self, a, t):
        if self.analytic:
            ax, ay = sample_potential(self.xb, self.yb, t, self.cfg.family)
            a[0][self.mask] = ax
            a[1][self.mask] = ay
        else:
            a[0][self.mask] = 0.0
            a[1][self.mask] = 0.0
        if self.periodic_x:
            a[:, -1, :] = a[:, 0, :]


def _advance(a, t, dt, cfg, coef, boundary, work):
    """One step of the configured scheme; returns the array holding the new state."""
    grid = cfg.grid
    periodic = boundary.periodic_x
    hx, hy = grid.hx, grid.hy
    u1, u2 = work
    if cfg.scheme == "euler":
        _stencils.stage(a, a, 0.0, 1.0, dt, coef, hx, hy, periodic, u1, True)
        boundary.apply(u1, t + dt)
        work[0] = a
        return u1
    # Shu-Osher SSP-RK3
    _stencils.stage(a, a, 0.0, 1.0, dt, coef, hx, hy, periodic, u1, True)
    boundary.apply(u1, t + dt)
    _stencils.stage(u1, a, 0.75, 0.25, dt, coef, hx, hy, periodic, u2, True)
    boundary.apply(u2, t + 0.5 * dt)
    _stencils.stage(u2, a, 1.0 / 3.0, 2.0 / 3.0, dt, coef, hx, hy, periodic, u1, True)
    boundary.apply(u1, t + dt)
    work[0] = a
    return u1


def _check_dt(cfg):
    bound = stability_bound(cfg)
    if cfg.dt_used > bound:
        raise StabilityBoundError(cfg.dt_used, bound)


def step(state: VectorPotentialField, cfg: SolverConfig, t: float = 0.0) -> VectorPotentialField:
    """Advance ``state`` from time ``t`` by one step of ``cfg.dt``."""
    _check_dt(cfg)
    a = state.stacked()
    work = [np.empty_like(a), np.empty_like(a)]
    a = _advance(a, t, cfg.dt, cfg, _operator(cfg), _Boundary(cfg), work)
    if not np.isfinite(a.sum()):
        raise InstabilityError(1, t + cfg.dt)
    return VectorPotentialField.from_arrays(cfg.grid, a[0], a[1])


def field_diagnostics(a: VectorPotentialField):
    """(B, integral |B_z| mu, integral B_z^2 mu, max |div A|, relative divergence)."""
    grid = a.grid
    b = exterior_derivative(a)
    l1 = integrate_with_volume(grid, np.abs(b.bz.values))
    energy = integrate_with_volume(grid, b.bz.values**2)
    div = float(np.max(np.abs(covariant_divergence(a).values)))
    sqrt_g, _, _ = grid_geometry(grid)
    scale = float(np.max(sqrt_g * np.maximum(np.abs(a.ax.values), np.abs(a.ay.values))))
    rel = div * min(grid.hx, grid.hy) / scale if scale > 0 else 0.0
    return b, l1, energy, div, rel


def run(
    cfg: SolverConfig,
    initial: VectorPotentialField,
    keep_snapshots: bool = False,
    callback: Optional[Callable[[int, float, VectorPotentialField], None]] = None,
) -> RunResult:
    """Integrate to ``cfg.t_end`` recording norms every ``snapshot_every`` steps.

    ``callback(step, t, potential)`` is invoked at each recorded time.
    """
    if initial.grid != cfg.grid:
        raise ValueError("initial field is not on the configured grid")
    _check_dt(cfg)
    coef = _operator(cfg)
    boundary = _Boundary(cfg)
    n, dt = cfg.n_steps, cfg.dt_used
    a = np.ascontiguousarray(initial.stacked())
    work = [np.empty_like(a), np.empty_like(a)]

    times, l1s, energies, divs, rels, snaps = [], [], [], [], [], []

    def record(k, t):
        pot = VectorPotentialField.from_arrays(cfg.grid, a[0], a[1])
        with np.errstate(over="ignore", invalid="ignore"):
            b, l1, energy, div, rel = field_diagnostics(pot)
        if not (math.isfinite(l1) and math.isfinite(energy)):
            raise InstabilityError(k, t)
        times.append(t)
        l1s.append(l1)
        energies.append(energy)
        divs.append(div)
        rels.append(rel)
        if keep_snapshots:
            snaps.append(Snapshot(t, pot, b))
        if callback is not None:
            callback(k, t, pot)
        return pot

    pot = record(0, 0.0)
    logger.debug("run: %d steps of dt=%.4g on %dx%d", n, dt, cfg.grid.nx, cfg.grid.ny)
    for k in range(1, n + 1):
        t = (k - 1) * dt
        a = _advance(a, t, dt, cfg, coef, boundary, work)
        if not np.isfinite(a.sum()):
            raise InstabilityError(k, k * dt)
        if k % cfg.snapshot_every == 0 or k == n:
            pot = record(k, k * dt)

    return RunResult(
        times=np.array(times),
        field_l1_norms=np.array(l1s),
        energy=np.array(energies),
        divergence_max=np.array(divs),
        divergence_rel=np.array(rels),
        config_echo=cfg,
        snapshots=snaps,
        final=pot,
    )


def initial_from_family(grid: Grid, family, t: float = 0.0) -> VectorPotentialField:
    X, Y = grid.mesh()
    ax, ay = sample_potential(X, Y, t, family)
    return VectorPotentialField.from_arrays(grid, ax, ay)


def refined_config(cfg: SolverConfig, factor: float) -> SolverConfig:
    """Same run on a grid ``factor`` times finer, dt scaled by 1/factor^2.

    The diffusive step limit scales with h^2, so the scaled dt stays inside
    the bound whenever the original did.
    """
    return dataclasses.replace(
        cfg,
        grid=cfg.grid.refined(factor),
        dt=cfg.dt / factor**2,
        snapshot_every=max(1, round(cfg.snapshot_every * factor**2)),
    )
