"""Command line entry point: ``symflow {run,verify,converge,decay-study} CONFIG``.

Exit status is 0 only if every configured check passes, 1 if a check fails
or the run aborts, and 2 for configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from . import __version__
from . import diagnostics as dg
from . import io
from .config import dump_manifest, load_config
from .errors import ConfigurationError, StepError, SymflowError
from .geometry import MassGrid
from .presets import InitialPreset, build_preset
from .solver import run, step
from .verification import ManufacturedCase, convergence_study, heat_mode_decay, temporal_study

log = logging.getLogger("symflow")


def _simulate(cfg, directory):
    """One solver run with outputs; returns the summary mapping."""
    grid = MassGrid(cfg.solver.N)
    initial = io.build_initial(cfg, grid)
    t_end = cfg.solver.t_end
    keep = "csv" in cfg.output["formats"] and bool(cfg.output["snapshots"])
    status_extra = {}
    try:
        traj = run(initial, t_end, cfg.solver, cfg.gas, cfg.law, cfg.geometry, grid,
                   sample_interval=float(cfg.output["sample_interval"]),
                   theta_hat=cfg.diagnostics["theta_hat"], keep_states=keep)
    except StepError as exc:
        traj = exc.trajectory
        status_extra["abort_reason"] = str(exc)
        log.error("%s", exc)
    if keep:
        traj.states = traj.states[::max(1, int(cfg.output["snapshot_every"]))]
    return io.emit_outputs(traj, traj.records, cfg, directory, t_end, grid, status_extra)


def fixed_point_check(cfg, steps=1000, dt=1e-3):
    """Constant equilibrium of the configured geometry through ``steps`` steps."""
    grid = MassGrid(cfg.solver.N)
    s0 = build_preset(InitialPreset("equilibrium", theta0=1.0), cfg.geometry, grid)
    s = s0
    conf = replace(cfg.solver, dt_init=min(dt, cfg.solver.dt_max))
    for _ in range(steps):
        s = step(s, conf.dt_init, conf, cfg.gas, cfg.law, cfg.geometry, grid)
    err = max(float(np.max(np.abs(getattr(s, f) - getattr(s0, f)))) for f in ("tau", "theta", "u", "v", "w", "r"))
    return io._check(err, 1e-12, err <= 1e-12)


def cmd_run(cfg, directory):
    return _simulate(cfg, directory)


def cmd_verify(cfg, directory):
    summary = _simulate(cfg, directory)
    checks = summary["checks"]
    checks["fixed_point"] = fixed_point_check(cfg)
    heat = heat_mode_decay(N=256, gas=cfg.gas)
    checks["heat_mode_rate"] = io._check(heat.rate, heat.expected, heat.relative_error <= 0.05)
    phi2 = dg.kanel_Phi(2.0, 1.0)
    z = np.linspace(1.0, 2.0, 400001)
    oracle = float(trapezoid(np.sqrt(dg.phi(z)) / z, z))
    checks["kanel_quadrature"] = io._check(abs(phi2 - oracle), 1e-8, abs(phi2 - oracle) < 1e-8)
    summary["all_passed"] = all(c["passed"] for c in checks.values())
    if "json" in cfg.output["formats"]:
        io.write_json(summary, Path(directory) / "summary.json")
    return summary


def _case_for(cfg):
    swirl = cfg.geometry.allows_swirl
    return ManufacturedCase(cfg.geometry, eps_v=0.1 if swirl else 0.0, eps_w=0.1 if swirl else 0.0)


def cmd_converge(cfg, directory):
    st = cfg.study
    case = _case_for(cfg)
    spatial = convergence_study(case, cfg.gas, cfg.law, tuple(int(n) for n in st["resolutions"]),
                                t_end=float(st["mms_t_end"]), dt_coeff=float(st["dt_coeff"]), config=cfg.solver)
    temporal = temporal_study(case, cfg.gas, cfg.law, N=int(st["temporal_N"]),
                              dts=tuple(float(d) for d in st["temporal_dts"]),
                              t_end=float(st["temporal_t_end"]), config=cfg.solver)
    directory = Path(directory)
    with open(directory / "convergence.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["study", "resolution [N or dt]", "field", "error [L2]", "order [log2 ratio]"])
        for table in (spatial, temporal):
            for i, res in enumerate(table.resolutions):
                for f, e in table.errors[i].items():
                    order = table.orders[i - 1][f] if i > 0 else ""
                    wr.writerow([table.kind, repr(res), f, repr(e), repr(order) if order != "" else ""])
    (directory / "convergence.txt").write_text(spatial.text() + "\n\n" + temporal.text() + "\n")
    print(spatial.text())
    print(temporal.text())
    chk = cfg.checks
    checks = {
        "spatial_order": io._check(spatial.min_order(), chk["order_spatial"], spatial.min_order() >= chk["order_spatial"]),
        "temporal_order": io._check(temporal.min_order(), chk["order_temporal"], temporal.min_order() >= chk["order_temporal"]),
    }
    summary = {"mode": "converge", "spatial": spatial.rows(), "temporal": temporal.rows(),
               "flags": spatial.flags + temporal.flags, "checks": checks,
               "all_passed": all(c["passed"] for c in checks.values())}
    if "json" in cfg.output["formats"]:
        io.write_json(summary, directory / "summary.json")
    return summary


def cmd_decay_study(cfg, directory):
    directory = Path(directory)
    rows = []
    members = {}
    for gamma in cfg.study["gammas"]:
        sub = cfg.with_gamma(gamma)
        sub_dir = io.ensure_writable(directory / f"gamma_{float(gamma):g}")
        summary = _simulate(sub, sub_dir)
        fit = summary.get("decay_fit", {"status": "unavailable"})
        ok = fit.get("status") == "ok" and fit["c_gamma"] > 0 and fit["r_squared"] >= cfg.checks["min_r_squared"]
        summary["checks"]["decay_fit"] = io._check(fit, {"c_gamma": "> 0", "r_squared": cfg.checks["min_r_squared"]}, ok)
        summary["all_passed"] = all(c["passed"] for c in summary["checks"].values())
        if "json" in cfg.output["formats"]:
            io.write_json(summary, sub_dir / "summary.json")
        members[f"{float(gamma):g}"] = summary["all_passed"]
        rows.append([repr(float(gamma)), repr(fit.get("C_gamma", float("nan"))), repr(fit.get("c_gamma", float("nan"))),
                     repr(fit.get("r_squared", float("nan"))), *(repr(w) for w in fit.get("window", ["nan", "nan"]))])
    with open(directory / "rates.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["gamma [gamma; 1]", "C_gamma [C_gamma; 1]", "c_gamma [c_gamma; 1/time]", "r_squared [R^2; 1]",
                     "window_start [t; time]", "window_end [t; time]"])
        wr.writerows(rows)
    checks = {f"gamma_{g}": io._check(ok, True, ok) for g, ok in members.items()}
    summary = {"mode": "decay-study", "members": members, "checks": checks,
               "all_passed": all(c["passed"] for c in checks.values())}
    if "json" in cfg.output["formats"]:
        io.write_json(summary, directory / "summary.json")
    return summary


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "converge": cmd_converge, "decay-study": cmd_decay_study}


def build_parser():
    ap = argparse.ArgumentParser(prog="symflow", description="Symmetric compressible Navier-Stokes solver and diagnostics")
    ap.add_argument("--version", action="version", version=f"symflow {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "run one simulation and write outputs"),
                            ("verify", "run plus the invariant and oracle suite"),
                            ("converge", "manufactured-solution convergence study"),
                            ("decay-study", "decay-rate fits over a sweep of gamma")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="YAML run configuration")
        p.add_argument("--output-dir", help="override output.directory")
        p.add_argument("--seed", type=int, help="override seed (recorded in the manifest)")
        p.add_argument("--strict", action="store_true", help="unknown config keys are errors")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, strict=args.strict)
        if args.output_dir:
            cfg.output["directory"] = args.output_dir
        if args.seed is not None:
            cfg.raw["seed"] = cfg.seed = args.seed
        cfg.raw["mode"] = cfg.mode = args.command
        np.random.seed(cfg.seed)
        directory = io.ensure_writable(cfg.output_dir)
        dump_manifest(cfg, directory / "manifest.yaml", {"symflow": __version__})
        summary = COMMANDS[args.command](cfg, directory)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except SymflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    failed = [name for name, c in summary["checks"].items() if not c["passed"]]
    for name, c in summary["checks"].items():
        print(f"{'PASS' if c['passed'] else 'FAIL'} {name}")
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
