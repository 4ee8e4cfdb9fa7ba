"""Lagrangian solver and diagnostics for symmetric compressible heat-conducting flows."""

from .gas import ConstantLaw, GasParams, PowerLaw, TabulatedLaw, internal_energy, pressure, transport_derivative, transport_eval
from .geometry import Geometry, MassGrid, eulerian_to_lagrangian, lagrangian_to_eulerian, radius_from_tau
from .solver import SolverConfig, SourceTerms, run, step
from .state import State

__version__ = "0.1.0"

__all__ = [
    "ConstantLaw", "GasParams", "PowerLaw", "TabulatedLaw", "internal_energy", "pressure",
    "transport_derivative", "transport_eval", "Geometry", "MassGrid", "eulerian_to_lagrangian",
    "lagrangian_to_eulerian", "radius_from_tau", "SolverConfig", "SourceTerms", "run", "step", "State",
]
