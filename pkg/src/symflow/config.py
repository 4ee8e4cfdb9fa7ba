"""YAML run configuration: schema, defaults, strict validation and manifests.

Schema (every key optional except ``geometry`` and ``gas.gamma``)::

    mode: run                  # run | verify | converge | decay-study
    seed: 0
    geometry:  {m, a, b, symmetry: spherical|cylindrical, d}
    gas:       {R: 1.0, gamma}
    transport: {law: power|constant|tabulated, mu_bar, lambda_bar, kappa_bar,
                exponent, potential_a, mu, lambda, kappa, table, theta_min, theta_max}
    initial:   {preset, epsilon, k, theta0, components, csv, frame, rescale}
    solver:    {N, t_end, dt_init, dt_min, dt_max, cfl_visc, cfl_acoustic, newton_tol,
                newton_max_iter, scheme, jacobian, positivity_floor, growth}
    output:    {directory, sample_interval, formats: [csv, json, svg],
                snapshots, snapshot_every, eulerian_snapshots}
    diagnostics: {theta_hat, fit_tail, noise_floor}
    checks:    {mass_tol, energy_tol, theta_bounds, order_spatial, order_temporal, min_r_squared}
    study:     {gammas, resolutions, mms_t_end, dt_coeff, temporal_N, temporal_dts, temporal_t_end}
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, fields
from pathlib import Path

import yaml

from .errors import ConfigurationError, SymflowError
from .gas import ConstantLaw, GasParams, PowerLaw, TabulatedLaw
from .geometry import Geometry
from .presets import InitialPreset
from .solver import SolverConfig

log = logging.getLogger(__name__)

MODES = ("run", "verify", "converge", "decay-study")

_SOLVER_DEFAULTS = {f.name: f.default for f in fields(SolverConfig)}

DEFAULTS = {
    "mode": "run",
    "seed": 0,
    "geometry": {"m": None, "a": 1.0, "b": 2.0, "symmetry": "spherical", "d": None},
    "gas": {"R": 1.0, "gamma": None},
    "transport": {
        "law": "power",
        "mu_bar": 1.0,
        "lambda_bar": 0.0,
        "kappa_bar": 1.0,
        "exponent": 0.5,
        "potential_a": None,
        "mu": 1.0,
        "lambda": 0.0,
        "kappa": 1.0,
        "table": None,
        "theta_min": 0.1,
        "theta_max": 10.0,
    },
    "initial": {
        "preset": "equilibrium",
        "epsilon": 0.05,
        "k": 1,
        "theta0": 1.0,
        "components": None,
        "csv": None,
        "frame": "eulerian",
        "rescale": False,
    },
    "solver": dict(_SOLVER_DEFAULTS),
    "output": {
        "directory": "symflow-out",
        "sample_interval": 0.05,
        "formats": ["csv", "json"],
        "snapshots": True,
        "snapshot_every": 1,
        "eulerian_snapshots": False,
    },
    "diagnostics": {"theta_hat": None, "fit_tail": 0.6, "noise_floor": 1e-12},
    "checks": {
        "mass_tol": 1e-13,
        "energy_tol": 1e-4,
        "theta_bounds": None,
        "order_spatial": 1.9,
        "order_temporal": 0.9,
        "min_r_squared": 0.99,
    },
    "study": {
        "gammas": [1.02, 1.05, 1.1],
        "resolutions": [64, 128, 256],
        "mms_t_end": 0.1,
        "dt_coeff": 1.0,
        "temporal_N": 32,
        "temporal_dts": [0.02, 0.01, 0.005, 0.0025, 0.00125],
        "temporal_t_end": 0.4,
    },
}

FORMATS = ("csv", "json", "svg")


@dataclass
class RunConfig:
    """Validated configuration plus the fully resolved raw mapping (the manifest)."""

    mode: str
    seed: int
    geometry: Geometry
    gas: GasParams
    law: object
    preset: InitialPreset | None
    initial: dict
    solver: SolverConfig
    output: dict
    diagnostics: dict
    checks: dict
    study: dict
    raw: dict
    source: Path | None = None

    @property
    def output_dir(self):
        return Path(self.output["directory"])

    def with_gamma(self, gamma):
        raw = copy.deepcopy(self.raw)
        raw["gas"]["gamma"] = float(gamma)
        return from_mapping(raw)

    def manifest(self):
        return copy.deepcopy(self.raw)


def _merge(defaults, given, path, problems, strict):
    out = {}
    for key, default in defaults.items():
        out[key] = copy.deepcopy(default)
    for key, value in (given or {}).items():
        if key not in defaults:
            msg = f"unknown key {path}{key}"
            if strict:
                problems.append(msg)
            else:
                log.warning("%s (ignored)", msg)
            continue
        sub = defaults[key]
        if isinstance(sub, dict):
            if value is None:
                continue
            if not isinstance(value, dict):
                problems.append(f"{path}{key} must be a mapping")
                continue
            out[key] = _merge(sub, value, f"{path}{key}.", problems, strict)
        else:
            out[key] = value
    return out


def _capture(problems, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigurationError as exc:
        problems.extend(exc.problems or [str(exc)])
    except (SymflowError, TypeError, ValueError) as exc:
        problems.append(str(exc))
    return None


def _build_law(tr, d, base_dir, problems):
    kind = tr["law"]
    if kind == "power":
        if tr["potential_a"] is not None:
            return _capture(problems, PowerLaw.from_potential, float(tr["potential_a"]), float(tr["mu_bar"]),
                            float(tr["lambda_bar"]), float(tr["kappa_bar"]), d)
        return _capture(problems, PowerLaw, float(tr["mu_bar"]), float(tr["lambda_bar"]), float(tr["kappa_bar"]),
                        float(tr["exponent"]), d)
    if kind == "constant":
        return _capture(problems, ConstantLaw, float(tr["mu"]), float(tr["lambda"]), float(tr["kappa"]), d)
    if kind == "tabulated":
        if not tr["table"]:
            problems.append("transport.table is required for the tabulated law")
            return None
        path = _resolve(tr["table"], base_dir)
        tr["table"] = str(path.resolve())
        if not path.is_file():
            problems.append(f"transport.table {path} does not exist")
            return None
        return _capture(problems, TabulatedLaw.from_csv, path, d)
    problems.append(f"transport.law must be power, constant or tabulated, got {kind!r}")
    return None


def _resolve(path, base_dir):
    p = Path(path)
    if not p.is_absolute() and base_dir is not None:
        p = Path(base_dir) / p
    return p


def from_mapping(data, strict=False, base_dir=None) -> RunConfig:
    """Validate a raw mapping; all problems are collected and raised together."""
    problems = []
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError("configuration must be a mapping", ["top level must be a mapping"])
    raw = _merge(DEFAULTS, data, "", problems, strict)

    if raw["mode"] not in MODES:
        problems.append(f"mode must be one of {MODES}, got {raw['mode']!r}")
    if "geometry" not in data:
        problems.append("geometry section is required")
    g = raw["geometry"]
    if g["m"] is None:
        g["m"] = 1 if g["symmetry"] == "cylindrical" else 0
    geom = _capture(problems, Geometry, g["m"], float(g["a"]), float(g["b"]), g["symmetry"])
    if geom is not None:
        if g["d"] is not None and int(g["d"]) != geom.d:
            problems.append(f"geometry.d = {g['d']} is inconsistent with m = {geom.m} ({g['symmetry']}); expected {geom.d}")
        g["d"] = geom.d

    gas = None
    if raw["gas"]["gamma"] is None:
        problems.append("gas.gamma is required")
    else:
        gas = _capture(problems, GasParams, float(raw["gas"]["gamma"]), float(raw["gas"]["R"]))

    tr = raw["transport"]
    law = _build_law(tr, geom.d if geom else 3, base_dir, problems)
    if law is not None:
        _capture(problems, law.validate, float(tr["theta_min"]), float(tr["theta_max"]))

    ini = raw["initial"]
    preset = None
    if ini["csv"]:
        path = _resolve(ini["csv"], base_dir)
        ini["csv"] = str(path.resolve())
        if not path.is_file():
            problems.append(f"initial.csv {path} does not exist")
        if ini["frame"] not in ("eulerian", "lagrangian"):
            problems.append("initial.frame must be eulerian or lagrangian")
    else:
        comps = tuple(ini["components"]) if ini["components"] is not None else None
        preset = _capture(problems, InitialPreset, ini["preset"], float(ini["epsilon"]), int(ini["k"]),
                          float(ini["theta0"]), comps)
        if preset is not None and geom is not None and not geom.allows_swirl:
            if ini["preset"] in ("velocity-pulse", "combined") and any(c in ("v", "w") for c in comps or ()):
                problems.append(f"initial.components {list(comps)} need nonzero v/w, which requires "
                                "geometry.symmetry = cylindrical (m = 1)")

    s = raw["solver"]
    solver = _capture(problems, _solver_config, s)

    out = raw["output"]
    bad = [f for f in out["formats"] if f not in FORMATS]
    if bad:
        problems.append(f"output.formats entries must be in {FORMATS}, got {bad}")
    if not out["sample_interval"] or float(out["sample_interval"]) <= 0:
        problems.append("output.sample_interval must be positive")

    chk = raw["checks"]
    if chk["theta_bounds"] is not None and (len(chk["theta_bounds"]) != 2 or not 0 < chk["theta_bounds"][0] < chk["theta_bounds"][1]):
        problems.append("checks.theta_bounds must be [low, high] with 0 < low < high")
    if not 0 < float(raw["diagnostics"]["fit_tail"]) <= 1:
        problems.append("diagnostics.fit_tail must lie in (0, 1]")

    if problems:
        raise ConfigurationError("invalid configuration:\n  - " + "\n  - ".join(problems), problems)
    return RunConfig(raw["mode"], int(raw["seed"]), geom, gas, law, preset, ini, solver, out,
                     raw["diagnostics"], chk, raw["study"], raw)


def _solver_config(s):
    kinds = {f.name: f.type for f in fields(SolverConfig)}
    values = {}
    for key, val in s.items():
        values[key] = int(val) if kinds[key] in ("int", int) else (str(val) if kinds[key] in ("str", str) else float(val))
    return SolverConfig(**values)


def load_config(path, strict=False) -> RunConfig:
    path = Path(path)
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}", [str(exc)]) from None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"malformed config {path}: {exc}", [str(exc)]) from None
    cfg = from_mapping(data, strict=strict, base_dir=path.parent)
    cfg.source = path
    return cfg


def dump_manifest(cfg: RunConfig, path, extra=None):
    """Write the resolved configuration (every default spelled out) as YAML."""
    doc = cfg.manifest()
    header = "# resolved symflow configuration; re-run with `symflow <mode> <this file>`\n"
    if extra:
        header += "".join(f"# {k}: {v}\n" for k, v in extra.items())
    Path(path).write_text(header + yaml.safe_dump(doc, sort_keys=False))
