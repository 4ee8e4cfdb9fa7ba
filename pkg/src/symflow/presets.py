"""Named initial data on the Lagrangian mass grid.

Velocities are sin(k pi x) at the edges, temperature and specific-volume
perturbations cos(k pi x) cell averages, so the boundary conditions and the
insulated-end compatibility hold and the cos(k pi x) perturbation of tau has
zero mean: the annulus condition fixes the mean of tau exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .geometry import Geometry, MassGrid, radius_from_tau
from .state import State

PRESETS = ("equilibrium", "tau-bump", "theta-bump", "velocity-pulse", "combined")


@dataclass(frozen=True)
class InitialPreset:
    name: str = "equilibrium"
    epsilon: float = 0.05
    k: int = 1
    theta0: float = 1.0
    components: tuple | None = None

    def __post_init__(self):
        problems = []
        if self.name not in PRESETS:
            problems.append(f"initial.preset must be one of {PRESETS}, got {self.name!r}")
        if int(self.k) != self.k or self.k < 1:
            problems.append("initial.k must be a positive integer")
        if not self.theta0 > 0:
            problems.append("initial.theta0 must be positive")
        if not 0 <= self.epsilon < 1:
            problems.append("initial.epsilon must lie in [0, 1)")
        for c in self.components or ():
            if c not in ("u", "v", "w"):
                problems.append(f"initial.components entries must be u, v or w, got {c!r}")
        if problems:
            raise ConfigurationError("; ".join(problems), problems)

    def velocity_components(self, geom: Geometry):
        if self.components is not None:
            return tuple(self.components)
        if self.name == "combined" and geom.allows_swirl:
            return ("u", "v", "w")
        return ("u",)


def _cos_cell_average(k, grid: MassGrid):
    kp = k * np.pi
    return np.diff(np.sin(kp * grid.edges)) / (kp * grid.widths)


def _sin_edges(k, grid: MassGrid):
    s = np.sin(k * np.pi * grid.edges)
    s[0] = s[-1] = 0.0
    return s


def build_preset(preset: InitialPreset, geom: Geometry, grid: MassGrid) -> State:
    tau_bar = geom.annulus_volume
    eps, k = preset.epsilon, preset.k
    name = preset.name
    n = grid.N
    tau = np.full(n, tau_bar)
    theta = np.full(n, float(preset.theta0))
    vel = {c: np.zeros(n + 1) for c in ("u", "v", "w")}
    if name in ("tau-bump", "combined"):
        tau = tau_bar * (1.0 + eps * _cos_cell_average(k, grid))
    if name in ("theta-bump", "combined"):
        theta = preset.theta0 * (1.0 + eps * _cos_cell_average(k, grid))
    if name in ("velocity-pulse", "combined"):
        comps = preset.velocity_components(geom)
        if not geom.allows_swirl and any(c in ("v", "w") for c in comps):
            raise ConfigurationError("v or w pulses need cylindrical symmetry with m = 1",
                                     ["initial.components: v/w require geometry.symmetry = cylindrical"])
        for c in comps:
            vel[c] = eps * _sin_edges(k, grid)
    return State(0.0, tau, theta, vel["u"], vel["v"], vel["w"], radius_from_tau(tau, geom, grid))
