"""Grid state container shared by the solver, diagnostics and I/O."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .errors import StateValidityError


@dataclass
class State:
    """Fields on the staggered mass grid.

    ``tau`` and ``theta`` live at the N cell centers; ``u``, ``v``, ``w`` and
    the radius ``r`` live at the N + 1 cell edges.
    """

    t: float
    tau: np.ndarray
    theta: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    r: np.ndarray

    @property
    def n_cells(self):
        return self.tau.size

    def copy(self):
        return copy.deepcopy(self)

    def fields(self):
        return {"tau": self.tau, "u": self.u, "v": self.v, "w": self.w, "theta": self.theta}

    def check(self, floor=0.0):
        n = self.tau.size
        if self.theta.size != n or any(a.size != n + 1 for a in (self.u, self.v, self.w, self.r)):
            raise StateValidityError("inconsistent field sizes on the staggered grid")
        if not np.all(np.isfinite(self.tau)) or not np.all(np.isfinite(self.theta)):
            raise StateValidityError("non-finite tau or theta")
        if np.min(self.tau) <= floor:
            raise StateValidityError(f"tau fell to {np.min(self.tau):.3e}")
        if np.min(self.theta) <= floor:
            raise StateValidityError(f"theta fell to {np.min(self.theta):.3e}")
        for name in ("u", "v", "w"):
            vel = getattr(self, name)
            if vel[0] != 0.0 or vel[-1] != 0.0:
                raise StateValidityError(f"{name} does not vanish on the boundary")
        return self
