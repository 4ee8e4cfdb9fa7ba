"""Initial-data ingestion, invariant checks and output files for one run."""

from __future__ import annotations

import csv
import json
import logging
import os
import tempfile
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import diagnostics as dg
from .errors import ConfigurationError, SymflowError
from .geometry import EulerianProfile, MassGrid, eulerian_to_lagrangian, lagrangian_to_eulerian, radius_from_tau
from .presets import build_preset
from .state import State

log = logging.getLogger(__name__)

EULERIAN_COLUMNS = ("r", "rho", "u", "v", "w", "theta")
LAGRANGIAN_COLUMNS = ("x", "tau", "u", "v", "w", "theta")

SNAPSHOT_HEADER = ["x [mass coordinate; mass]", "r [r; length]", "tau [tau; volume/mass]",
                   "u [u; length/time]", "v [v; length/time]", "w [w; length/time]", "theta [theta; temperature]"]
EULERIAN_HEADER = ["r [r; length]", "rho [rho = 1/tau; mass/volume]", "u [u; length/time]",
                   "v [v; length/time]", "w [w; length/time]", "theta [theta; temperature]"]


# ---------------------------------------------------------------------------
# initial data


def _column_key(name):
    """Header cell ``"rho [rho; mass/volume]"`` -> ``"rho"``."""
    return name.split("[")[0].strip().lower()


def read_table(path, required):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ConfigurationError(f"{path}: needs a header and at least one data row")
    keys = [_column_key(c) for c in rows[0]]
    missing = [c for c in required if c not in keys and c not in ("v", "w")]
    if missing:
        raise ConfigurationError(f"{path}: missing columns {missing}")
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:] if row], dtype=float)
    except ValueError as exc:
        raise ConfigurationError(f"{path}: non-numeric or ragged data ({exc})") from None
    table = {k: data[:, i] for i, k in enumerate(keys)}
    for c in ("v", "w"):
        table.setdefault(c, np.zeros(data.shape[0]))
    return table


def read_eulerian_csv(path, geom, grid: MassGrid, rescale=False) -> State:
    """Columns r, rho, u, v, w, theta sampled on [a, b]; cubic-spline interpolated."""
    tab = read_table(path, EULERIAN_COLUMNS)
    r = tab["r"]
    if not np.all(np.diff(r) > 0):
        raise ConfigurationError(f"{path}: r must be strictly increasing")
    tol = 1e-9 * (geom.b - geom.a)
    if abs(r[0] - geom.a) > tol or abs(r[-1] - geom.b) > tol:
        raise ConfigurationError(f"{path}: samples must span [a, b] = [{geom.a}, {geom.b}]")
    if np.any(tab["rho"] <= 0):
        raise ConfigurationError(f"{path}: density must be positive")
    spl = {k: CubicSpline(r, tab[k]) for k in ("rho", "u", "v", "w", "theta")}
    profile = EulerianProfile(spl["rho"], spl["theta"], spl["u"], spl["v"], spl["w"])
    return eulerian_to_lagrangian(profile, geom, grid, rescale=rescale)


def read_lagrangian_csv(path, geom, grid: MassGrid) -> State:
    """Columns x, tau, u, v, w, theta sampled on [0, 1]; interpolated to cells/edges."""
    tab = read_table(path, LAGRANGIAN_COLUMNS)
    x = tab["x"]
    if not np.all(np.diff(x) > 0) or abs(x[0]) > 1e-12 or abs(x[-1] - 1.0) > 1e-12:
        raise ConfigurationError(f"{path}: x must increase strictly from 0 to 1")
    spl = {k: CubicSpline(x, tab[k]) for k in ("tau", "u", "v", "w", "theta")}
    tau = spl["tau"](grid.centers)
    theta = spl["theta"](grid.centers)
    vel = {}
    for k in ("u", "v", "w"):
        f = spl[k](grid.edges)
        f[0] = f[-1] = 0.0
        vel[k] = f
    return State(0.0, tau, theta, vel["u"], vel["v"], vel["w"], radius_from_tau(tau, geom, grid))


def build_initial(cfg, grid: MassGrid | None = None) -> State:
    grid = grid or MassGrid(cfg.solver.N)
    ini = cfg.initial
    if ini["csv"]:
        if ini["frame"] == "eulerian":
            return read_eulerian_csv(ini["csv"], cfg.geometry, grid, rescale=bool(ini["rescale"]))
        return read_lagrangian_csv(ini["csv"], cfg.geometry, grid)
    return build_preset(cfg.preset, cfg.geometry, grid)


# ---------------------------------------------------------------------------
# output files


def ensure_writable(directory):
    """Create ``directory`` and prove it is writable before any work starts."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        fd, probe = tempfile.mkstemp(dir=directory, prefix=".probe-")
        os.close(fd)
        os.unlink(probe)
    except OSError as exc:
        raise OSError(f"output directory {directory} is not writable: {exc}") from exc
    return directory


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_diagnostics_csv(records, path):
    header = [f"{name} [{dg.RECORD_META[name][0]}; {dg.RECORD_META[name][1]}]" for name in dg.RECORD_FIELDS]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for rec in records:
            wr.writerow([_fmt(getattr(rec, name)) for name in dg.RECORD_FIELDS])


def write_snapshot(state: State, geom, grid: MassGrid, directory, eulerian=False):
    """Edge-row snapshot: r, u, v, w exact; tau, theta reconstructed to the edges."""
    from .geometry import _centers_to_edges

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    name = f"{state.t:.6f}.csv"
    cols = [grid.edges, state.r, _centers_to_edges(state.tau), state.u, state.v, state.w, _centers_to_edges(state.theta)]
    with open(directory / name, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(SNAPSHOT_HEADER)
        for row in zip(*cols):
            wr.writerow([_fmt(v) for v in row])
    if eulerian:
        ed = directory.parent / "snapshots_eulerian"
        ed.mkdir(parents=True, exist_ok=True)
        view = lagrangian_to_eulerian(state, geom, grid)
        with open(ed / name, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(EULERIAN_HEADER)
            for row in zip(*(view[k] for k in EULERIAN_COLUMNS)):
                wr.writerow([_fmt(v) for v in row])


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(data, path):
    Path(path).write_text(json.dumps(_json_safe(data), indent=2, sort_keys=False) + "\n")


def write_svg(records, snapshot: State | None, directory):
    """Line plots of h1_deviation (log scale) and the final field profiles."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not installed; skipping SVG output (pip install symflow[plot])")
        return []
    directory = Path(directory)
    out = []
    t = [r.t for r in records]
    h = [max(r.h1_deviation, 1e-300) for r in records]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(t, h)
    ax.set_xlabel("t")
    ax.set_ylabel("H1 deviation")
    fig.tight_layout()
    fig.savefig(directory / "h1_deviation.svg", metadata={"Date": None})
    plt.close(fig)
    out.append("h1_deviation.svg")
    if snapshot is not None:
        n = snapshot.tau.size
        xc = (np.arange(n) + 0.5) / n
        xe = np.linspace(0.0, 1.0, n + 1)
        fig, axes = plt.subplots(1, 3, figsize=(11, 3.4))
        axes[0].plot(xc, snapshot.tau)
        axes[0].set_title("tau")
        axes[1].plot(xc, snapshot.theta)
        axes[1].set_title("theta")
        for name in ("u", "v", "w"):
            axes[2].plot(xe, getattr(snapshot, name), label=name)
        axes[2].legend()
        axes[2].set_title("velocity")
        for ax in axes:
            ax.set_xlabel("x")
        fig.tight_layout()
        fig.savefig(directory / "profiles.svg", metadata={"Date": None})
        plt.close(fig)
        out.append("profiles.svg")
    return out


# ---------------------------------------------------------------------------
# checks and summary


def _check(value, threshold, passed):
    return {"passed": bool(passed), "value": value, "threshold": threshold}


def evaluate_checks(traj, cfg, t_end):
    recs = [r for r in traj.records if r is not None]
    chk = cfg.checks
    out = {"completed": _check(traj.status, "completed", traj.status == "completed")}
    if len(recs) < 1:
        return out
    tb = traj.tau_bar
    mass = max(abs(r.mean_tau - tb) / tb for r in recs)
    out["mass_conservation"] = _check(mass, chk["mass_tol"], mass <= chk["mass_tol"])
    E = np.array([r.total_energy for r in recs])
    drift = float((E.max() - E.min()) / abs(E[0]))
    limit = chk["energy_tol"] * max(1.0, t_end)
    out["energy_drift"] = _check(drift, limit, drift <= limit)
    pos = min(min(r.tau_min for r in recs), min(r.theta_min for r in recs))
    out["positivity"] = _check(pos, 0.0, pos > 0)
    final = traj.final
    if final is not None:
        rb = abs(final.r[-1] - cfg.geometry.b)
        out["outer_radius"] = _check(rb, 1e-10, rb <= 1e-10 and final.r[0] == cfg.geometry.a)
    if len(recs) >= 2:
        res, acc = dg.entropy_balance_residual(recs)
        H = np.array([r.relative_entropy for r in recs])
        excess = float(np.max(np.diff(H) - np.abs(res)))
        budget = 1e-3 * (H[0] + 1.0) * max(1.0, t_end)
        out["entropy_dissipation"] = _check({"max_excess_increase": excess, "accumulated_residual": acc},
                                            {"excess": 0.0, "accumulated": budget},
                                            excess <= 1e-14 * (H[0] + 1.0) and acc <= budget)
    if chk["theta_bounds"] is not None:
        lo, hi = chk["theta_bounds"]
        tmin = min(r.theta_min for r in recs)
        tmax = max(r.theta_max for r in recs)
        out["theta_bounds"] = _check([tmin, tmax], [lo, hi], lo <= tmin and tmax <= hi)
    return out


def decay_fit_summary(records, cfg):
    t = [r.t for r in records if r is not None]
    h = [r.h1_deviation for r in records if r is not None]
    try:
        fit = dg.fit_decay(t, h, tail_fraction=float(cfg.diagnostics["fit_tail"]),
                           noise_floor=float(cfg.diagnostics["noise_floor"]))
    except SymflowError as exc:
        return {"status": "unavailable", "reason": str(exc)}
    return {"status": "ok", "C_gamma": fit.C_gamma, "c_gamma": fit.c_gamma, "r_squared": fit.r_squared,
            "window": list(fit.window), "samples": fit.samples}


def summarize(traj, cfg, t_end, checks, extra=None):
    recs = [r for r in traj.records if r is not None]
    summary = {
        "mode": cfg.mode,
        "status": traj.status,
        "t_final": traj.final.t if traj.final is not None else None,
        "steps": traj.steps,
        "rejections": traj.rejections,
        "tau_bar": traj.tau_bar,
        "theta_bar": traj.theta_bar,
    }
    if recs:
        E = [r.total_energy for r in recs]
        M = [r.mean_tau for r in recs]
        summary["drifts"] = {
            "mass_relative": max(abs(m - traj.tau_bar) for m in M) / traj.tau_bar,
            "energy_relative": (max(E) - min(E)) / abs(E[0]),
        }
        summary["extrema"] = {
            "tau_min": min(r.tau_min for r in recs),
            "tau_max": max(r.tau_max for r in recs),
            "theta_min": min(r.theta_min for r in recs),
            "theta_max": max(r.theta_max for r in recs),
            "kanel_Phi_max": max(r.kanel_Phi_max for r in recs),
        }
        summary["final"] = {
            "h1_deviation": recs[-1].h1_deviation,
            "relative_entropy": recs[-1].relative_entropy,
            "r_deviation_h2": recs[-1].r_deviation_h2,
        }
        if len(recs) >= 2:
            res, acc = dg.entropy_balance_residual(recs)
            summary["entropy_budget"] = {"accumulated_residual": acc, "max_interval_residual": float(np.max(np.abs(res)))}
        summary["decay_fit"] = decay_fit_summary(recs, cfg)
    if extra:
        summary.update(extra)
    summary["checks"] = checks
    summary["all_passed"] = all(c["passed"] for c in checks.values())
    return summary


def emit_outputs(traj, records, cfg, directory, t_end, grid: MassGrid | None = None, extra=None):
    """Write diagnostics.csv, snapshots, summary.json and optional SVGs; return the summary."""
    directory = Path(directory)
    formats = cfg.output["formats"]
    recs = [r for r in records if r is not None]
    if "csv" in formats:
        write_diagnostics_csv(recs, directory / "diagnostics.csv")
        if cfg.output["snapshots"] and traj.states:
            grid = grid or MassGrid(traj.states[0].tau.size)
            for s in traj.states:
                write_snapshot(s, cfg.geometry, grid, directory / "snapshots", cfg.output["eulerian_snapshots"])
    checks = evaluate_checks(traj, cfg, t_end)
    summary = summarize(traj, cfg, t_end, checks, extra)
    if "svg" in formats and recs:
        summary["figures"] = write_svg(recs, traj.final, directory)
    if "json" in formats:
        write_json(summary, directory / "summary.json")
    return summary
