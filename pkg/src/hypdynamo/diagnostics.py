"""Growth rates, field reversals, energies and the entropy-bound bookkeeping.

The norm whose growth is tracked is the total flux-like quantity
``integral |B_z| mu`` with mu = y^-2 dx dy, and the energy is
``integral B_z^2 mu``. Both are trapezoidal quadratures on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .analytic import ForceFreeParams, growth_rate, sample_force_free_bz
from .errors import DegenerateFitError, DegenerateParameterError, DomainError
from .fields import Grid, MagneticTwoForm, integrate_with_volume

DEFAULT_WINDOW = 0.5


# --- growth-rate fits ----------------------------------------------------------


@dataclass(frozen=True)
class GrowthFit:
    gamma_est: float
    intercept: float
    fit_window: tuple
    residual_rms: float

    def __post_init__(self):
        if not self.fit_window[0] < self.fit_window[1]:
            raise ValueError(f"empty fit window {self.fit_window}")


def fit_growth_rate(times, norms, window_fraction: float = DEFAULT_WINDOW) -> GrowthFit:
    """Least-squares slope of ln(norm) against t over the final ``window_fraction``.

    The window starts at the first sample with t >= t_end - fraction * (t_end - t_0).
    """
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if times.shape != norms.shape or times.ndim != 1:
        raise ValueError("times and norms must be 1-D arrays of equal length")
    if not 0 < window_fraction <= 1:
        raise ValueError(f"window_fraction={window_fraction} must lie in (0, 1]")
    if len(times) < 3:
        raise DegenerateFitError(f"need at least 3 samples, got {len(times)}")
    t_start = times[-1] - window_fraction * (times[-1] - times[0])
    sel = times >= t_start - 1e-12 * max(1.0, abs(t_start))
    t, n = times[sel], norms[sel]
    if len(t) < 3:
        raise DegenerateFitError(f"only {len(t)} samples in the fit window")
    if not np.all(n > 0):
        raise DegenerateFitError("non-positive norm in the fit window")
    logn = np.log(n)
    slope, intercept = np.polyfit(t, logn, 1)
    resid = logn - (slope * t + intercept)
    return GrowthFit(
        gamma_est=float(slope),
        intercept=float(intercept),
        fit_window=(float(t[0]), float(t[-1])),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
    )


# --- integrals -------------------------------------------------------------------


def magnetic_energy(b: MagneticTwoForm) -> float:
    """Trapezoidal integral of B_z^2 y^-2 over the grid."""
    return integrate_with_volume(b.grid, b.bz.values**2)


def field_l1_norm(b: MagneticTwoForm) -> float:
    """Trapezoidal integral of |B_z| y^-2 over the grid."""
    return integrate_with_volume(b.grid, np.abs(b.bz.values))


def closed_form_series(grid: Grid, params: ForceFreeParams, times):
    """(l1 norms, energies) of the sampled closed-form force-free B_z at ``times``."""
    X, Y = grid.mesh()
    l1, energy = [], []
    for t in times:
        b = MagneticTwoForm.from_array(grid, sample_force_free_bz(X, Y, t, params))
        l1.append(field_l1_norm(b))
        energy.append(magnetic_energy(b))
    return np.array(l1), np.array(energy)


# --- reversal lines ----------------------------------------------------------------


def _column_at(b: MagneticTwoForm, x_slice: float):
    grid = b.grid
    if not grid.x_min <= x_slice <= grid.x_max:
        raise DomainError(f"x_slice={x_slice} outside [{grid.x_min}, {grid.x_max}]")
    xs = grid.x
    k = int(np.searchsorted(xs, x_slice, side="right")) - 1
    k = min(max(k, 0), grid.nx - 2)
    w = (x_slice - xs[k]) / (xs[k + 1] - xs[k])
    return (1.0 - w) * b.bz.values[k] + w * b.bz.values[k + 1]


def reversal_scan(b: MagneticTwoForm, x_slice: float):
    """Sign changes of B_z along y at fixed x, as a list of (y_cross, sign).

    ``sign`` is +1 where B_z turns from negative to positive with increasing
    y and -1 for the opposite change. Brackets come from the grid samples;
    each is refined by bisection on a cubic spline through the column until
    the bracket is narrower than hy / 100. A run of exact zeros between
    opposite signs is reported at its midpoint.
    """
    grid = b.grid
    ys = grid.y
    col = _column_at(b, x_slice)
    spline = CubicSpline(ys, col)
    tol = grid.hy / 100.0
    nonzero = np.flatnonzero(col != 0.0)
    crossings = []
    for k0, k1 in zip(nonzero[:-1], nonzero[1:]):
        s0, s1 = np.sign(col[k0]), np.sign(col[k1])
        if s0 == s1:
            continue
        sign = 1 if s1 > 0 else -1
        if k1 - k0 > 1:
            crossings.append((float(0.5 * (ys[k0 + 1] + ys[k1 - 1])), sign))
            continue
        lo, hi = ys[k0], ys[k1]
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if np.sign(spline(mid)) == s0:
                lo = mid
            else:
                hi = mid
        crossings.append((float(0.5 * (lo + hi)), sign))
    return crossings


# --- entropy bound -----------------------------------------------------------------


@dataclass(frozen=True)
class EntropyCheck:
    """Quantities entering h_top >= gamma(eta) = V0 K - eta lambda^2 >= 0.

    ``fast_dynamo`` is gamma_formula >= 0 and ``v0_above_threshold`` is
    V0 >= eta lambda^2 / K; both are decided in exact rational arithmetic
    on the binary values of the parameters, so ``ordering_consistent``
    cannot be spoiled by rounding. ``rate_consistent`` is None when no
    estimate was supplied.
    """

    gamma_est: Optional[float]
    gamma_formula: float
    htop_lower_bound: float
    v0_threshold: float
    fast_dynamo: bool
    v0_above_threshold: bool
    ordering_consistent: bool
    rate_consistent: Optional[bool]
    rate_tolerance: float = field(default=0.02)

    @property
    def satisfied(self):
        return {
            "fast_dynamo": self.fast_dynamo,
            "v0_above_threshold": self.v0_above_threshold,
            "ordering_consistent": self.ordering_consistent,
            "rate_consistent": self.rate_consistent,
        }


def entropy_bound_check(
    params: ForceFreeParams, gamma_est: Optional[float] = None, rel_tol: float = 0.02
) -> EntropyCheck:
    if not params.k_sep > 0:
        raise DegenerateParameterError(f"k_sep={params.k_sep} must be > 0 for the bound")
    v0, k, lam, eta = (Fraction(v) for v in (params.v0, params.k_sep, params.lam, params.eta))
    gamma_exact = v0 * k - lam * lam * eta
    threshold_exact = eta * lam * lam / k
    fast = gamma_exact >= 0
    above = v0 >= threshold_exact
    # correctly rounded, so its sign always agrees with the exact value
    gamma_formula = float(gamma_exact)
    rate_ok = None
    if gamma_est is not None:
        if not math.isfinite(gamma_est):
            raise ValueError("gamma_est must be finite")
        scale = max(abs(gamma_formula), 1.0)
        rate_ok = abs(gamma_est - gamma_formula) <= rel_tol * scale
    return EntropyCheck(
        gamma_est=gamma_est,
        gamma_formula=gamma_formula,
        htop_lower_bound=float(max(gamma_exact, Fraction(0))),
        v0_threshold=float(threshold_exact),
        fast_dynamo=fast,
        v0_above_threshold=above,
        ordering_consistent=fast == above,
        rate_consistent=rate_ok,
        rate_tolerance=rel_tol,
    )


# --- geodesic deviation ------------------------------------------------------------


def integrate_deviation(j0: float, dj0: float, s_end: float, n_steps: int, curvature: float = -1.0):
    """Classical RK4 for J'' + K J = 0 on [0, s_end]; returns (s, J, dJ/ds)."""
    if n_steps < 10:
        raise ValueError(f"n_steps={n_steps} must be >= 10")
    if not (s_end > 0 and math.isfinite(s_end)):
        raise ValueError(f"s_end={s_end} must be positive")
    ds = s_end / n_steps
    s = np.linspace(0.0, s_end, n_steps + 1)
    out = np.empty((n_steps + 1, 2))
    state = np.array([j0, dj0], dtype=float)
    out[0] = state

    def rhs(u):
        return np.array([u[1], -curvature * u[0]])

    for n in range(n_steps):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * ds * k1)
        k3 = rhs(state + 0.5 * ds * k2)
        k4 = rhs(state + ds * k3)
        state = state + ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[n + 1] = state
    return s, out[:, 0], out[:, 1]


# --- energy growth -------------------------------------------------------------------


def literal_energy_approximation(x, y, t, gamma):
    """The printed small-y energy estimate -(1/3) x y^-3 z e^(gamma t) with z = 1."""
    return -x * np.asarray(y, dtype=float) ** -3 * np.exp(gamma * np.asarray(t)) / 3.0


@dataclass(frozen=True)
class EnergyGrowthReport:
    energy_rate: Optional[float]
    expected_rate: float
    rate_rel_err: Optional[float]
    rate_ok: Optional[bool]
    fit_skipped: bool
    literal_rate: float
    literal_final: float
    measured_final: float
    literal_sign_matches: bool
    literal_rate_matches: bool


def energy_growth_report(
    result, params: ForceFreeParams, rel_tol: float = 0.01, window_fraction: float = DEFAULT_WINDOW
) -> EnergyGrowthReport:
    """``energy_series_report`` for the energy series of a solver RunResult."""
    return energy_series_report(
        result.times, result.energy, params, result.config_echo.grid, rel_tol, window_fraction
    )


def energy_series_report(
    times, energy, params: ForceFreeParams, grid: Grid, rel_tol: float = 0.01,
    window_fraction: float = DEFAULT_WINDOW,
) -> EnergyGrowthReport:
    """Compare the energy growth of a series with 2 gamma and with the printed estimate.

    The printed estimate is evaluated at the corner (x_max, y_min) of the
    grid, which is where it is largest in magnitude on the domain.
    """
    times = np.asarray(times, dtype=float)
    energy = np.asarray(energy, dtype=float)
    gamma = growth_rate(params)
    expected = 2.0 * gamma
    if np.all(energy == 0):
        rate = rel = ok = None
        skipped = True
    else:
        rate = fit_growth_rate(times, energy, window_fraction).gamma_est
        err = abs(rate - expected)
        rel = err / abs(expected) if expected else err
        ok = err <= (rel_tol * abs(expected) if expected else 1e-8)
        skipped = False
    literal = float(literal_energy_approximation(grid.x_max, grid.y_min, times[-1], gamma))
    measured = float(energy[-1])
    return EnergyGrowthReport(
        energy_rate=rate,
        expected_rate=expected,
        rate_rel_err=rel,
        rate_ok=ok,
        fit_skipped=skipped,
        literal_rate=gamma,
        literal_final=literal,
        measured_final=measured,
        literal_sign_matches=bool(np.sign(literal) == np.sign(measured)),
        literal_rate_matches=math.isclose(gamma, expected, rel_tol=rel_tol, abs_tol=1e-12),
    )
