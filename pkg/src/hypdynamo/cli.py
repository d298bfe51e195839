"""Command-line front end.

Subcommands: geometry-check, evolve, sweep-eta, reversal, deviation, errata.
Exit status: 0 success, 1 failed check, 2 configuration or usage error,
3 numerical instability.

Environment:
    HYPDYNAMO_OUT      output directory, overriding the config (``--out`` wins over both)
    HYPDYNAMO_THREADS  worker threads for the stepping kernels; results do not depend on it
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import analytic, config as cfgmod, diagnostics, geometry, solver
from .analytic import ForcedParams, ForceFreeParams
from .errors import (
    ConfigError,
    DegenerateFitError,
    DomainError,
    InstabilityError,
    RangeError,
    StabilityBoundError,
)
from .fields import (
    Grid,
    MagneticTwoForm,
    VectorPotentialField,
    exterior_derivative,
    write_field_csv,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_INSTABILITY = 3

ENV_OUT = "HYPDYNAMO_OUT"
ENV_THREADS = "HYPDYNAMO_THREADS"

A3_REL_TOL = 0.01
SWEEP_REL_TOL = 0.02
REVERSAL_SLICES = 5

log = logging.getLogger("hypdynamo")


class UsageError(Exception):
    pass


# --- small output helpers ---------------------------------------------------------


def _g(v):
    return f"{v:.17g}"


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_g(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out: Path, command, cfg, artifacts, diagnostics_summary, errata=None, **extra):
    """Write manifest.json listing every artifact with its sha256."""
    listing = []
    for path in artifacts:
        p = Path(path)
        listing.append({"path": p.relative_to(out).as_posix(), "sha256": _sha256(p), "bytes": p.stat().st_size})
    payload = {
        "command": command,
        "config": cfgmod.as_dict(cfg) if cfg is not None else None,
        "artifacts": listing,
        "diagnostics": diagnostics_summary,
        "errata": errata or {},
    }
    payload.update(extra)
    _write_json(out / "manifest.json", payload)


def verify_manifest(out) -> bool:
    """True when every artifact listed in ``out/manifest.json`` exists with a matching hash."""
    out = Path(out)
    manifest = json.loads((out / "manifest.json").read_text())
    for item in manifest["artifacts"]:
        p = out / item["path"]
        if not p.exists() or _sha256(p) != item["sha256"]:
            return False
    return True


def _out_dir(args, cfg=None) -> Path:
    if getattr(args, "out", None):
        path = Path(args.out)
    elif os.environ.get(ENV_OUT):
        path = Path(os.environ[ENV_OUT])
    elif cfg is not None:
        path = Path(cfg.output.directory)
    else:
        path = Path("out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _apply_threads():
    raw = os.environ.get(ENV_THREADS)
    if not raw:
        return
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{ENV_THREADS}={raw!r} is not an integer") from None
    import numba

    if n < 1:
        raise UsageError(f"{ENV_THREADS} must be >= 1")
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


# --- solver configuration from a run config ------------------------------------


def flow_for(cfg: cfgmod.RunConfig) -> solver.FlowField:
    kind = cfg.solver.flow
    if kind == "auto":
        kind = "vertical_profile" if cfg.model == "force_free" else "horizontal_constant"
    if kind == "none":
        return solver.FlowField("vertical_profile", 0.0)
    return solver.FlowField(kind, cfg.params.v0)


def solver_config(cfg: cfgmod.RunConfig, params=None, grid=None) -> solver.SolverConfig:
    """SolverConfig for ``cfg``; ``dt = auto`` resolves to dt_safety * stability bound.

    Raises StabilityBoundError when no positive step is admissible or the
    configured step exceeds the bound.
    """
    params = params or cfg.params
    grid = grid or cfg.grid
    s = cfg.solver
    probe_dt = s.dt if s.dt is not None else s.t_end
    sc = solver.SolverConfig(
        grid=grid,
        dt=probe_dt,
        t_end=s.t_end,
        eta=params.eta,
        flow=flow_for(cfg),
        diffusion_sign=s.diffusion_sign,
        boundary=s.boundary,
        snapshot_every=s.snapshot_every,
        family=params,
        scheme=s.scheme,
        velocity_index=s.velocity_index,
    )
    bound = solver.stability_bound(sc)
    if s.dt is None:
        if bound <= 0:
            raise StabilityBoundError(probe_dt, bound)
        dt = min(s.t_end, s.dt_safety * bound) if math.isfinite(bound) else s.t_end / 100.0
        sc = dataclasses.replace(sc, dt=dt)
    if sc.dt_used > bound:
        raise StabilityBoundError(sc.dt_used, bound)
    return sc


def _rate(result, window, series="l1"):
    values = result.field_l1_norms if series == "l1" else result.energy
    return diagnostics.fit_growth_rate(result.times, values, window)


# --- geometry-check ------------------------------------------------------------


def geometry_report(settings: cfgmod.GeometrySettings):
    rng = np.random.default_rng(settings.seed)
    xs = rng.uniform(-10.0, 10.0, settings.n_points)
    ys = rng.uniform(settings.y_low, settings.y_high, settings.n_points)
    exact_fail = identity_fail = 0
    fd_err = []
    stencil_outside = 0
    chr_err = 0.0
    hc = settings.christoffel_h
    for x, y in zip(xs, ys):
        p = geometry.HalfPlanePoint(float(x), float(y))
        k = geometry.gaussian_curvature_at(p)
        exact_fail += k != -1.0
        sqrt_g = geometry.metric_at(p).sqrt_g
        identity_fail += geometry.riemann_1212_at(p) / (sqrt_g * sqrt_g) != k
        try:
            fd_err.append(abs(geometry.gaussian_curvature_fd(p, settings.h) + 1.0))
        except DomainError:
            stencil_outside += 1
        if y - hc > geometry.DEFAULT_MIN_Y:
            chr_err = max(chr_err, christoffel_fd_error(p, hc))
    fd_max = max(fd_err) if fd_err else float("nan")
    checks = {
        "curvature_exact": exact_fail == 0,
        "riemann_identity": identity_fail == 0,
        "curvature_fd_within_tolerance": stencil_outside == 0 and fd_max <= settings.tolerance,
        "christoffel_fd_within_tolerance": chr_err <= settings.christoffel_tolerance,
    }
    return {
        "n_points": settings.n_points,
        "h": settings.h,
        "curvature_exact_failures": exact_fail,
        "riemann_identity_failures": identity_fail,
        "curvature_fd_max_error": fd_max,
        "curvature_fd_stencil_outside_domain": stencil_outside,
        "tolerance": settings.tolerance,
        "christoffel_fd_max_rel_error": chr_err,
        "christoffel_tolerance": settings.christoffel_tolerance,
        "checks": checks,
        "passed": all(checks.values()),
    }


def christoffel_fd_error(p: geometry.HalfPlanePoint, h: float) -> float:
    """Max relative deviation of christoffel_at from symbols built by central differences of metric_at."""

    def g(x, y):
        m = geometry.metric_at(geometry.HalfPlanePoint(x, y))
        return np.array([[m.g11, 0.0], [0.0, m.g22]])

    dg = [
        (g(p.x + h, p.y) - g(p.x - h, p.y)) / (2 * h),
        (g(p.x, p.y + h) - g(p.x, p.y - h)) / (2 * h),
    ]
    ginv = np.linalg.inv(g(p.x, p.y))
    fd = np.zeros((2, 2, 2))
    for a in range(2):
        for b in range(2):
            for c in range(2):
                fd[a, b, c] = 0.5 * sum(
                    ginv[a, d] * (dg[b][d, c] + dg[c][d, b] - dg[d][b, c]) for d in range(2)
                )
    exact = geometry.christoffel_at(p).as_array()
    scale = np.max(np.abs(exact))
    return float(np.max(np.abs(fd - exact)) / scale)


def cmd_geometry_check(args) -> int:
    cfg = cfgmod.parse_file(args.config)
    out = _out_dir(args, cfg)
    report = geometry_report(cfg.geometry)
    path = out / "geometry_report.json"
    _write_json(path, report)
    _write_manifest(out, "geometry-check", cfg, [path], {"passed": report["passed"]})
    print(f"curvature fd max error {report['curvature_fd_max_error']:.3e} "
          f"(tolerance {cfg.geometry.tolerance:g}); passed={report['passed']}")
    return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED


# --- evolve ---------------------------------------------------------------------


def _snapshot_writer(out: Path, cfg: cfgmod.RunConfig, written: list):
    field_dir = out / "fields"
    field_dir.mkdir(exist_ok=True)
    every = cfg.output.field_every
    count = [0]
    n_steps = [None]

    def write(step, t, pot: VectorPotentialField):
        index = count[0]
        count[0] += 1
        final = step == n_steps[0]
        if not (final or (every > 0 and index % every == 0)):
            return
        b = exterior_derivative(pot)
        path = field_dir / f"bz_step{step:07d}.csv"
        write_field_csv(path, b.bz)
        written.append(path)
        if cfg.output.write_potential:
            for name, comp in (("ax", pot.ax), ("ay", pot.ay)):
                p = field_dir / f"{name}_step{step:07d}.csv"
                write_field_csv(p, comp)
                written.append(p)

    return write, n_steps


def evolve_diagnostics(cfg: cfgmod.RunConfig, sc: solver.SolverConfig, result):
    window = cfg.solver.window_fraction
    summary = {"n_steps": sc.n_steps, "dt": sc.dt_used, "stability_bound": solver.stability_bound(sc)}
    try:
        summary["gamma_est"] = _rate(result, window).gamma_est
    except DegenerateFitError as exc:
        summary["gamma_est"] = None
        summary["gamma_fit_error"] = str(exc)
    try:
        summary["energy_rate"] = _rate(result, window, "energy").gamma_est
    except DegenerateFitError:
        summary["energy_rate"] = None
    div = result.divergence_max
    summary["divergence_initial"] = float(div[0])
    summary["divergence_max_over_run"] = float(np.max(div))
    summary["divergence_growth_factor"] = float(np.max(div) / div[0]) if div[0] > 0 else None
    summary["divergence_rel_initial"] = float(result.divergence_rel[0])
    summary["divergence_rel_max_over_run"] = float(np.max(result.divergence_rel))
    b = exterior_derivative(result.final)
    xmid = 0.5 * (cfg.grid.x_min + cfg.grid.x_max)
    summary["reversal_crossings_final"] = diagnostics.reversal_scan(b, xmid)
    if isinstance(cfg.params, ForceFreeParams):
        summary["gamma_formula"] = analytic.growth_rate(cfg.params)
        if cfg.params.k_sep > 0:
            check = diagnostics.entropy_bound_check(cfg.params, summary["gamma_est"])
            summary["entropy_flags"] = check
    else:
        summary["gamma_formula"] = cfg.params.gamma
        summary["gamma_is_negative"] = cfg.params.gamma_is_negative
    if summary.get("gamma_est") is not None:
        summary["gamma_abs_deviation_from_formula"] = abs(summary["gamma_est"] - summary["gamma_formula"])
    return summary


def reference_rate(cfg: cfgmod.RunConfig, sc: solver.SolverConfig):
    """Growth rate of the same run on a grid refined by ``solver.reference_factor``."""
    ref = solver.refined_config(sc, cfg.solver.reference_factor)
    result = solver.run(ref, solver.initial_from_family(ref.grid, ref.family))
    return ref, _rate(result, cfg.solver.window_fraction).gamma_est


def cmd_evolve(args) -> int:
    cfg = cfgmod.parse_file(args.config)
    try:
        sc = solver_config(cfg)
    except StabilityBoundError as exc:
        print(f"error: {exc}; stability bound = {exc.bound:.17g}", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(args, cfg)
    written = []
    cfg_path = out / "config.ini"
    cfg_path.write_text(cfgmod.echo(cfg))
    written.append(cfg_path)
    writer, n_box = _snapshot_writer(out, cfg, written)
    n_box[0] = sc.n_steps
    initial = solver.initial_from_family(sc.grid, sc.family)
    try:
        result = solver.run(sc, initial, callback=writer)
    except InstabilityError as exc:
        _write_manifest(out, "evolve", cfg, written, {}, status="instability",
                        failed_step=exc.step, failed_time=exc.time)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSTABILITY

    norms = out / "norms.csv"
    _write_csv(
        norms,
        ["t", "l1_norm", "energy", "divergence_max"],
        zip(result.times.tolist(), result.field_l1_norms.tolist(), result.energy.tolist(),
            result.divergence_max.tolist()),
    )
    written.insert(1, norms)
    summary = evolve_diagnostics(cfg, sc, result)
    use_reference = (
        cfg.solver.reference_factor >= 1
        and cfg.solver.reference_factor != 1
        and isinstance(cfg.params, ForceFreeParams)
        and summary.get("gamma_est") is not None
    )
    if use_reference:
        try:
            ref, rate = reference_rate(cfg, sc)
        except InstabilityError as exc:
            _write_manifest(out, "evolve", cfg, written, summary, status="instability",
                            failed_step=exc.step, failed_time=exc.time, failed_run="reference")
            return EXIT_INSTABILITY
        summary["reference"] = {
            "grid": [ref.grid.nx, ref.grid.ny],
            "dt": ref.dt_used,
            "gamma": rate,
            "rel_diff": abs(summary["gamma_est"] - rate) / abs(rate),
            "formula_rel_deviation": abs(rate - summary["gamma_formula"]) / abs(summary["gamma_formula"])
            if summary["gamma_formula"] else None,
        }
        summary["reference"]["within_tolerance"] = summary["reference"]["rel_diff"] <= A3_REL_TOL
    _write_manifest(out, "evolve", cfg, written, summary, errata=static_errata(),
                    status="ok", failed_step=None)
    print(f"gamma_est={summary.get('gamma_est')} gamma_formula={summary.get('gamma_formula')}")
    return EXIT_OK


# --- sweep-eta --------------------------------------------------------------------


def sweep_row(cfg: cfgmod.RunConfig, eta: float):
    params = dataclasses.replace(cfg.params, eta=eta)
    row = {"eta": eta, "gamma_formula": analytic.growth_rate(params)}
    try:
        sc = solver_config(cfg, params=params)
        base = solver.run(sc, solver.initial_from_family(sc.grid, params))
        row["gamma_est"] = _rate(base, cfg.solver.window_fraction).gamma_est
        row["abs_err"] = abs(row["gamma_est"] - row["gamma_formula"])
        factor = cfg.solver.reference_factor
        if factor > 1:
            ref = solver.refined_config(sc, factor)
            result = solver.run(ref, solver.initial_from_family(ref.grid, params))
            row["gamma_reference"] = _rate(result, cfg.solver.window_fraction).gamma_est
            row["ref_rel_err"] = abs(row["gamma_est"] - row["gamma_reference"]) / abs(row["gamma_reference"])
            row["row_ok"] = row["ref_rel_err"] <= SWEEP_REL_TOL
        else:
            row["gamma_reference"] = float("nan")
            row["ref_rel_err"] = float("nan")
            row["row_ok"] = True
    except (StabilityBoundError, InstabilityError, DegenerateFitError, RangeError) as exc:
        row.update(gamma_est=float("nan"), abs_err=float("nan"), gamma_reference=float("nan"),
                   ref_rel_err=float("nan"), row_ok=False, error=str(exc))
    return row


def _affine(xs, ys):
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    ok = np.isfinite(ys)
    if ok.sum() < 2:
        return None
    slope, intercept = np.polyfit(xs[ok], ys[ok], 1)
    return {"slope": float(slope), "intercept": float(intercept)}


def cmd_sweep_eta(args) -> int:
    cfg = cfgmod.parse_file(args.config)
    etas = args.eta
    if not etas:
        raise UsageError("sweep-eta needs at least one --eta value")
    if any(not (math.isfinite(e) and e >= 0) for e in etas):
        raise UsageError(f"all eta values must be finite and >= 0, got {etas}")
    if cfg.model != "force_free":
        raise UsageError("sweep-eta needs params.model = force_free")
    out = _out_dir(args, cfg)
    rows = [sweep_row(cfg, float(e)) for e in etas]
    for r in rows:
        log.info("eta=%g gamma_formula=%.6g gamma_est=%.6g ok=%s", r["eta"], r["gamma_formula"],
                 r["gamma_est"], r["row_ok"])
    csv_path = out / "sweep.csv"
    cols = ["eta", "gamma_formula", "gamma_est", "abs_err", "gamma_reference", "ref_rel_err", "row_ok"]
    _write_csv(csv_path, cols,
               ([float(r[c]) if c != "row_ok" else str(r[c]).lower() for c in cols] for r in rows))
    summary = {
        "formula_fit": _affine(etas, [r["gamma_formula"] for r in rows]),
        "estimate_fit": _affine(etas, [r["gamma_est"] for r in rows]),
        "reference_fit": _affine(etas, [r["gamma_reference"] for r in rows]),
        "expected_slope": -cfg.params.lam**2,
        "expected_intercept": cfg.params.v0 * cfg.params.k_sep,
        "rows": rows,
        "all_rows_ok": all(r["row_ok"] for r in rows),
    }
    summary_path = out / "sweep_summary.json"
    _write_json(summary_path, summary)
    _write_manifest(out, "sweep-eta", cfg, [csv_path, summary_path],
                    {"all_rows_ok": summary["all_rows_ok"]})
    for r in rows:
        print(f"eta={r['eta']:g} formula={r['gamma_formula']:.6g} est={r['gamma_est']:.6g} "
              f"ref={r['gamma_reference']:.6g} ok={r['row_ok']}")
    return EXIT_OK if summary["all_rows_ok"] else EXIT_CHECK_FAILED


# --- reversal ---------------------------------------------------------------------


def reversal_report(cfg: cfgmod.RunConfig, t: float = 0.0):
    grid = cfg.grid
    X, Y = grid.mesh()
    bz = analytic.sample_bz(X, Y, t, cfg.params)
    b = MagneticTwoForm.from_array(grid, bz)
    width = grid.x_max - grid.x_min
    slices = [grid.x_min + width * (k + 1) / (REVERSAL_SLICES + 1) for k in range(REVERSAL_SLICES)]
    if cfg.model == "force_free":
        expected, physical = analytic.reversal_line_force_free(), True
    else:
        line = analytic.reversal_line_forced(cfg.params)
        expected, physical = line.y0, line.physical
    inside = physical and grid.y_min < expected < grid.y_max
    results, ok = [], True
    for x in slices:
        crossings = diagnostics.reversal_scan(b, x)
        if inside:
            good = len(crossings) == 1 and abs(crossings[0][0] - expected) <= grid.hy
        else:
            good = len(crossings) == 0
        ok &= good
        results.append({"x": x, "crossings": crossings, "ok": good})
    return {
        "model": cfg.model,
        "expected_line": expected,
        "physical": physical,
        "line_inside_grid": inside,
        "message": "reversal line inside the grid" if inside else (
            "no physical reversal line" if not physical else "reversal line outside the grid"),
        "hy": grid.hy,
        "slices": results,
        "passed": ok,
    }, b, slices


def cmd_reversal(args) -> int:
    cfg = cfgmod.parse_file(args.config)
    out = _out_dir(args, cfg)
    try:
        report, b, slices = reversal_report(cfg)
    except RangeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    path = out / "reversal_report.json"
    _write_json(path, report)
    slice_path = out / "bz_slices.csv"
    rows = []
    for x in slices:
        col = diagnostics._column_at(b, x)
        rows.extend((float(x), float(y), float(v)) for y, v in zip(cfg.grid.y, col))
    _write_csv(slice_path, ["x", "y", "bz"], rows)
    _write_manifest(out, "reversal", cfg, [path, slice_path],
                    {"passed": report["passed"], "expected_line": report["expected_line"]})
    print(report["message"])
    for s in report["slices"]:
        print(f"x={s['x']:.4g}: {[round(c[0], 6) for c in s['crossings']]}")
    return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED


# --- deviation ---------------------------------------------------------------------


def cmd_deviation(args) -> int:
    if not (math.isfinite(args.s_end) and args.s_end > 0):
        raise UsageError(f"--s-end must be positive, got {args.s_end}")
    if args.n_steps < 10:
        raise UsageError(f"--n-steps must be >= 10, got {args.n_steps}")
    out = _out_dir(args)
    s, j, _ = diagnostics.integrate_deviation(args.j0, args.dj0, args.s_end, args.n_steps)
    closed = args.j0 * np.cosh(s) + analytic.deviation_solution(s, args.dj0)
    err = np.abs(j - closed)
    scale = float(np.max(np.abs(closed)))
    rel = float(np.max(err) / scale) if scale > 0 else float(np.max(err))
    path = out / "deviation.csv"
    _write_csv(path, ["s", "J_numeric", "J_closed_form", "abs_err"],
               zip(s.tolist(), j.tolist(), closed.tolist(), err.tolist()))
    passed = rel <= args.tol
    _write_manifest(out, "deviation", None, [path],
                    {"max_abs_err": float(np.max(err)), "max_rel_err": rel, "tolerance": args.tol,
                     "passed": passed})
    print(f"max relative error {rel:.3e} (tolerance {args.tol:g})")
    return EXIT_OK if passed else EXIT_CHECK_FAILED


# --- errata -----------------------------------------------------------------------


def diffusion_sign_experiment(cfg: cfgmod.RunConfig, n=33, steps=20):
    """Both diffusion signs on a windowed field, zero boundaries and no flow."""
    g = cfg.grid
    grid = Grid(g.x_min, g.x_max, g.y_min, g.y_max, n, n)
    X, Y = grid.mesh()
    window = np.sin(np.pi * (X - g.x_min) / (g.x_max - g.x_min)) * np.sin(
        np.pi * (Y - g.y_min) / (g.y_max - g.y_min))
    initial = VectorPotentialField.from_arrays(grid, np.zeros(grid.shape), Y**2 * window)
    eta = cfg.params.eta if cfg.params.eta > 0 else 0.1
    base = solver.SolverConfig(grid=grid, dt=1.0, t_end=1.0, eta=eta,
                               flow=solver.FlowField("vertical_profile", 0.0),
                               boundary="dirichlet_zero", snapshot_every=1)
    dt = 0.5 * solver.stability_bound(base)
    readings = {}
    for sign in solver.DIFFUSION_SIGNS:
        sc = dataclasses.replace(base, dt=dt, t_end=steps * dt, diffusion_sign=sign)
        r = solver.run(sc, initial)
        n1 = r.field_l1_norms
        readings[sign] = {
            "l1_initial": float(n1[0]),
            "l1_final": float(n1[-1]),
            "ratio": float(n1[-1] / n1[0]),
            "monotone_non_increasing": bool(np.all(np.diff(n1) <= 0)),
            "monotone_non_decreasing": bool(np.all(np.diff(n1) >= 0)),
        }
    return {
        "id": "diffusion_sign",
        "location": "induction equation: sign of the diffusion term next to the time derivative",
        "readings": readings,
        "finding": "standard sign decays, as-written sign grows (anti-diffusion)"
        if readings["standard"]["ratio"] < 1 < readings["as_written"]["ratio"] else "inconclusive",
        "setup": {"grid": [n, n], "eta": eta, "dt": dt, "steps": steps},
    }


def field_prefactor_experiment(params: ForceFreeParams, ys=(0.3, 0.4, 0.75, 1.0, 2.0, 3.0)):
    """Printed force-free B_z against the two ways of differentiating the potential."""
    ys = np.asarray(ys, dtype=float)
    a0, k = params.a0, params.k_sep
    e = np.exp(k / ys**2)
    printed_full = 2 * a0 * (-2 / ys**3 + 1 / ys**4) * e
    printed_short = 2 * a0 * (-2 / ys + 1 / ys**2) * e
    upper = 2 * k * a0 / ys**3 * e            # -d_y A^x
    lower = a0 * (2 / ys**3 + 2 * k / ys**5) * e  # -d_y (y^-2 A^x)

    def mismatch(c, target):
        return float(np.max(np.abs(c - target) / np.maximum(np.abs(target), 1e-300)))

    # finite-difference confirmation that the package's d acts on the lowered component
    grid = Grid(0.0, 1.0, 0.3, 3.0, 8, 2001)
    X, Y = grid.mesh()
    pot = VectorPotentialField.from_arrays(grid, a0 * np.exp(k / Y**2), np.zeros(grid.shape))
    bz = exterior_derivative(pot).bz.values[3]
    y = grid.y
    exact = a0 * (2 / y**3 + 2 * k / y**5) * np.exp(k / y**2)  # -d_y (y^-2 A^x)
    fd_rel = float(np.max(np.abs(bz[1:-1] - exact[1:-1])) / np.max(np.abs(exact)))
    return {
        "id": "field_prefactor",
        "location": "force-free field two-form: y^-3/y^-4 bracket versus y^-1/y^-2 bracket",
        "y": ys,
        "readings": {
            "bracket_full": printed_full,
            "bracket_short": printed_short,
            "ratio_short_over_full": printed_short / printed_full,
            "candidate_upper_index": upper,
            "candidate_lower_index": lower,
        },
        "mismatch": {
            "upper_vs_full": mismatch(upper, printed_full),
            "upper_vs_short": mismatch(upper, printed_short),
            "lower_vs_full": mismatch(lower, printed_full),
            "lower_vs_short": mismatch(lower, printed_short),
        },
        "candidates_change_sign": {
            "upper_index": bool(np.any(np.diff(np.sign(upper)) != 0)),
            "lower_index": bool(np.any(np.diff(np.sign(lower)) != 0)),
        },
        "exterior_derivative_vs_lower_index_rel_err": fd_rel,
        "finding": "the short bracket is the full bracket times y^2; neither derivative of the "
                   "potential reproduces either bracket, and neither changes sign for k_sep >= 0",
    }


def restoring_force_experiment(ys=(0.5, 1.0, 2.0)):
    readings = {}
    for mode in analytic.RESIDUAL_MODES:
        readings[mode] = {
            "residual": [analytic.nongeodesic_residual(y, mode=mode) for y in ys],
            "lhs": [analytic.nongeodesic_residual(y, mode=mode) - y for y in ys],
        }
    return {
        "id": "restoring_force_residual",
        "location": "non-geodesic flow equation with V^y = y^2 and restoring force F = -y",
        "y": list(ys),
        "readings": readings,
        "finding": "residual is nonzero under both readings of d/ds (chain rule gives y^3 + y)",
    }


def energy_form_experiment(cfg: cfgmod.RunConfig, params: ForceFreeParams, n_times=11):
    times = np.linspace(0.0, cfg.solver.t_end, n_times)
    grid = cfg.grid
    try:
        _, energy = diagnostics.closed_form_series(grid, params, times)
    except RangeError:
        grid = Grid(grid.x_min, grid.x_max, max(grid.y_min, 0.25), grid.y_max, grid.nx, grid.ny)
        _, energy = diagnostics.closed_form_series(grid, params, times)
    rep = diagnostics.energy_series_report(times, energy, params, grid)
    return {
        "id": "energy_small_y_form",
        "location": "small-y approximation of the magnetic energy, -(1/3) x y^-3 z e^(gamma t)",
        "readings": {
            "quadratic_energy": {"rate": rep.energy_rate, "expected_rate": rep.expected_rate,
                                 "final_value": rep.measured_final},
            "literal_with_z_1": {"rate": rep.literal_rate, "final_value_at_corner": rep.literal_final},
        },
        "sign_matches": rep.literal_sign_matches,
        "rate_matches": rep.literal_rate_matches,
        "finding": "literal form is negative and grows at gamma, the energy is positive and grows at 2 gamma",
    }


def velocity_index_experiment(params: ForceFreeParams):
    grid = Grid(0.0, 1.0, 0.5, 2.0, 9, 61)
    pot = solver.initial_from_family(grid, params)
    flow = solver.FlowField("vertical_profile", params.v0)
    low = solver.advection_term(pot, flow, "lowered")[0].values[4, 1:-1]
    raw = solver.advection_term(pot, flow, "raw")[0].values[4, 1:-1]
    y = grid.y[1:-1]
    return {
        "id": "velocity_index",
        "location": "advection term U_j(A^{i,j} - A^{j,i}): covariant or contravariant U",
        "y": y,
        "readings": {"lowered": low, "raw": raw},
        "ratio_raw_over_lowered_div_y2_max_dev": float(np.max(np.abs(raw / low / y**2 - 1.0))),
        "finding": "using contravariant components directly multiplies the term by y^2",
    }


def forced_index_experiment(params: ForcedParams, ys=(0.5, 1.0, 2.0), x=1.0):
    upper = [analytic.forced_bz(geometry.HalfPlanePoint(x, y), 0.0, params) for y in ys]
    lower = [b / y**2 for b, y in zip(upper, ys)]
    return {
        "id": "forced_index_position",
        "location": "forced field two-form written with A_x while the potential is A^x",
        "y": list(ys),
        "readings": {"upper_index": upper, "lower_index": lower},
        "finding": "readings differ by y^-2; the zero line is the same",
    }


def static_errata():
    """The run-free part of the errata ledger, for evolve manifests."""
    return {"restoring_force_residual": restoring_force_experiment()}


def errata_ledger(cfg: cfgmod.RunConfig):
    ff = cfg.params if isinstance(cfg.params, ForceFreeParams) else ForceFreeParams()
    forced = cfg.params if isinstance(cfg.params, ForcedParams) else ForcedParams()
    return [
        diffusion_sign_experiment(cfg),
        field_prefactor_experiment(ff),
        restoring_force_experiment(),
        energy_form_experiment(cfg, ff),
        velocity_index_experiment(ff),
        forced_index_experiment(forced),
    ]


def cmd_errata(args) -> int:
    cfg = cfgmod.parse_file(args.config)
    out = _out_dir(args, cfg)
    entries = errata_ledger(cfg)
    path = out / "errata.json"
    _write_json(path, {"entries": entries})
    _write_manifest(out, "errata", cfg, [path], {"n_entries": len(entries)},
                    errata={e["id"]: e.get("finding") for e in entries})
    for e in entries:
        print(f"{e['id']}: {e['finding']}")
    return EXIT_OK


# --- entry point -----------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="hypdynamo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.set_defaults(func=func)
        return p

    with_config("geometry-check", cmd_geometry_check, "curvature and connection checks")
    with_config("evolve", cmd_evolve, "time-integrate the configured family")
    p = with_config("sweep-eta", cmd_sweep_eta, "growth rate against diffusivity")
    p.add_argument("--eta", type=float, nargs="*", default=None, required=True)
    with_config("reversal", cmd_reversal, "locate field reversal lines")
    with_config("errata", cmd_errata, "evaluate the documented discrepancies")

    p = sub.add_parser("deviation", help="integrate the geodesic deviation equation")
    p.add_argument("--s-end", type=float, default=5.0)
    p.add_argument("--n-steps", type=int, default=10000)
    p.add_argument("--j0", type=float, default=0.0)
    p.add_argument("--dj0", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_deviation)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _apply_threads()
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InstabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSTABILITY


if __name__ == "__main__":
    sys.exit(main())
