"""Symmetry bookkeeping and the Eulerian <-> Lagrangian mass-coordinate map.

The Lagrangian coordinate of a radius r in the annulus [a, b] is the
normalized mass  x = h(r) / h(b),  h(r) = int_a^r z^m rho0(z) dz.  On the
mass grid the radius is rebuilt from the specific volume by the exact
prefix sum  r_i^{m+1} = a^{m+1} + (m+1) sum_{j<i} tau_j dx_j.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError, NumericError, StateValidityError
from .state import State

log = logging.getLogger(__name__)

SYMMETRIES = ("spherical", "cylindrical")


@dataclass(frozen=True)
class Geometry:
    """Annulus a < r < b with symmetry index m.

    ``spherical`` covers planar (m=0), disc-like (m=1, d=2) and true
    spherical flows (m=2); then d = m + 1 and the swirl components v, w are
    identically zero.  ``cylindrical`` requires m = 1, d = 3 and allows v, w.
    """

    m: int
    a: float
    b: float
    symmetry: str = "spherical"
    d: int = field(init=False)

    def __post_init__(self):
        problems = []
        if not (isinstance(self.m, (int, np.integer)) and self.m >= 0):
            problems.append(f"symmetry index m must be a non-negative integer, got {self.m!r}")
        if not 0 < self.a:
            problems.append(f"inner radius must be positive, got a={self.a}")
        if not self.a < self.b:
            problems.append(f"a < b required (a={self.a}, b={self.b})")
        if self.symmetry not in SYMMETRIES:
            problems.append(f"symmetry must be one of {SYMMETRIES}, got {self.symmetry!r}")
        elif self.symmetry == "cylindrical" and self.m != 1:
            problems.append("cylindrical symmetry requires m = 1")
        if problems:
            raise ConfigurationError("; ".join(problems), problems)
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "d", 3 if self.symmetry == "cylindrical" else self.m + 1)

    @property
    def allows_swirl(self):
        return self.symmetry == "cylindrical"

    @property
    def annulus_volume(self):
        """(b^{m+1} - a^{m+1}) / (m+1), the mean specific volume the grid must carry."""
        k = self.m + 1
        return (self.b**k - self.a**k) / k


@dataclass(frozen=True)
class MassGrid:
    """Cell edges 0 = x_0 < ... < x_N = 1 on the mass interval."""

    N: int
    edges: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.N < 1:
            raise ConfigurationError(f"mass grid needs N >= 1, got {self.N}")
        edges = self.edges
        if edges is None:
            edges = np.linspace(0.0, 1.0, self.N + 1)
        edges = np.asarray(edges, dtype=float)
        if edges.size != self.N + 1 or edges[0] != 0.0 or edges[-1] != 1.0:
            raise ConfigurationError("mass grid edges must run from 0 to 1 with N + 1 entries")
        if not np.all(np.diff(edges) > 0):
            raise ConfigurationError("mass grid edges must be strictly increasing")
        object.__setattr__(self, "edges", edges)

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def dx(self):
        """Uniform spacing; raises for nonuniform grids."""
        w = self.widths
        if not np.allclose(w, w[0], rtol=1e-12, atol=0.0):
            raise ConfigurationError("operation requires a uniform mass grid")
        return 1.0 / self.N


# Gauss-Legendre nodes on [0, 1] for the panel quadrature of h.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


class MassMap:
    """h(r) = int_a^r z^m rho0(z) dz by composite 8-point Gauss-Legendre quadrature."""

    def __init__(self, rho0: Callable, geom: Geometry, panels: int = 256, scale: float = 1.0):
        self.geom = geom
        self.rho0 = rho0
        self.scale = scale
        self.panel_edges = np.linspace(geom.a, geom.b, panels + 1)
        self.panel_edges[-1] = geom.b
        lo, hi = self.panel_edges[:-1], self.panel_edges[1:]
        z = lo[:, None] + (hi - lo)[:, None] * _GL_X[None, :]
        dens = self._density(z)
        contrib = (hi - lo) * np.sum(_GL_W * z**geom.m * dens, axis=1)
        self.cumulative = np.concatenate([[0.0], np.cumsum(contrib)])

    def _density(self, r):
        rho = np.asarray(self.rho0(r), dtype=float) * self.scale
        rho = np.broadcast_to(rho, np.shape(r))
        if not np.all(rho > 0):
            raise DomainError("initial density must be strictly positive on [a, b]", "rho")
        return rho

    @property
    def total_mass(self):
        return float(self.cumulative[-1])

    def density_weight(self, r):
        """dh/dr = r^m rho0(r)."""
        return np.asarray(r, dtype=float) ** self.geom.m * self._density(r)

    def h(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < self.geom.a) or np.any(r > self.geom.b):
            raise DomainError("radius outside the annulus [a, b]", "r")
        k = np.clip(np.searchsorted(self.panel_edges, r, side="right") - 1, 0, self.panel_edges.size - 2)
        lo = self.panel_edges[k]
        width = r - lo
        z = lo[..., None] + width[..., None] * _GL_X
        partial = width * np.sum(_GL_W * z**self.geom.m * self._density(z), axis=-1)
        return self.cumulative[k] + partial

    def x_of_r(self, r):
        return self.h(r) / self.total_mass

    def inverse(self, x, tol=1e-12, max_iter=200):
        """Solve x = h(r)/h(b) for r by safeguarded Newton (bisection fallback)."""
        x = np.asarray(x, dtype=float)
        target = x * self.total_mass
        lo = np.full(x.shape, self.geom.a)
        hi = np.full(x.shape, self.geom.b)
        r = self.geom.a + x * (self.geom.b - self.geom.a)
        done = np.zeros(x.shape, dtype=bool)
        done |= x <= 0.0
        done |= x >= 1.0
        r = np.where(x <= 0.0, self.geom.a, np.where(x >= 1.0, self.geom.b, r))
        for _ in range(max_iter):
            if done.all():
                break
            f = self.h(r) - target
            lo = np.where(f < 0, r, lo)
            hi = np.where(f > 0, r, hi)
            newton = r - f / self.density_weight(r)
            inside = (newton > lo) & (newton < hi)
            r_new = np.where(inside, newton, 0.5 * (lo + hi))
            step = np.abs(r_new - r)
            r = np.where(done, r, r_new)
            done |= (step <= tol) | (f == 0.0)
        if not done.all():
            bad = x[~done].ravel()[0]
            raise NumericError(f"mass-coordinate inversion did not converge at x={bad:.15g}")
        return r


def mass_coordinate(rho0: Callable, geom: Geometry, rescale: bool = False, tol: float = 1e-10, panels: int = 256):
    """Build the map r -> x and return ``(MassMap, total_mass)``.

    The normalized coordinate assumes h(b) = 1.  Profiles with a different
    total mass abort unless ``rescale`` is set, in which case rho0 is scaled
    by 1/h(b).
    """
    mmap = MassMap(rho0, geom, panels=panels)
    total = mmap.total_mass
    if abs(total - 1.0) > tol:
        if not rescale:
            raise ConfigurationError(
                f"initial density carries total mass h(b)={total:.12g}, expected 1; "
                "set initial.rescale to scale it"
            )
        log.info("rescaling initial density by 1/h(b) = %.12g", 1.0 / total)
        mmap = MassMap(rho0, geom, panels=panels, scale=1.0 / total)
    return mmap, total


def radius_from_tau(tau, geom: Geometry, grid: MassGrid):
    """Edge radii from cell specific volumes by left-to-right prefix sum."""
    tau = np.asarray(tau, dtype=float)
    if not np.all(tau > 0):
        raise StateValidityError("radius reconstruction needs tau > 0 on every cell")
    k = geom.m + 1
    cum = np.concatenate([[0.0], np.cumsum(tau * grid.widths)])
    if geom.m == 0:
        r = geom.a + cum
    else:
        r = (geom.a**k + k * cum) ** (1.0 / k)
    r[0] = geom.a
    return r


def equilibrium_radius(tau_bar, geom: Geometry, x):
    """r_bar(x) = [a^{m+1} + (m+1) tau_bar x]^{1/(m+1)}."""
    if not tau_bar > 0:
        raise DomainError("tau_bar must be positive", "tau")
    k = geom.m + 1
    x = np.asarray(x, dtype=float)
    if geom.m == 0:
        return geom.a + tau_bar * x
    return (geom.a**k + k * tau_bar * x) ** (1.0 / k)


@dataclass(frozen=True)
class AnnulusCheck:
    passed: bool
    integral: float
    expected: float

    @property
    def mismatch(self):
        return self.integral - self.expected


def validate_annulus_consistency(tau, geom: Geometry, grid: MassGrid | None = None, tol=1e-10, raise_on_failure=True):
    """Check int_0^1 tau dx == (b^{m+1} - a^{m+1})/(m+1), so that r(1) = b."""
    tau = np.asarray(tau, dtype=float)
    widths = grid.widths if grid is not None else np.full(tau.size, 1.0 / tau.size)
    integral = float(np.sum(tau * widths))
    expected = geom.annulus_volume
    passed = abs(integral - expected) <= tol * max(1.0, abs(expected))
    result = AnnulusCheck(passed, integral, expected)
    if not passed and raise_on_failure:
        raise ConfigurationError(
            f"annulus inconsistency: int tau dx = {integral:.15g} but "
            f"(b^(m+1)-a^(m+1))/(m+1) = {expected:.15g}"
        )
    return result


@dataclass
class EulerianProfile:
    """Initial fields as callables of the radius on [a, b]."""

    rho: Callable
    theta: Callable
    u: Callable | None = None
    v: Callable | None = None
    w: Callable | None = None


def _eval(fn, r):
    if fn is None:
        return np.zeros_like(r)
    return np.broadcast_to(np.asarray(fn(r), dtype=float), np.shape(r)).copy()


def eulerian_to_lagrangian(profile: EulerianProfile, geom: Geometry, grid: MassGrid, rescale=False):
    """Compose the Eulerian data with r0 = h^{-1} and return the t = 0 State.

    tau on each cell is the exact cell volume over the cell mass, so the
    prefix-sum radius reproduces r0 at every edge and the annulus check holds
    by construction.  theta is sampled at r0 of the cell mass centers and the
    velocities at r0 of the edges.
    """
    mmap, _ = mass_coordinate(profile.rho, geom, rescale=rescale)
    r_edges = mmap.inverse(grid.edges)
    r_edges[0], r_edges[-1] = geom.a, geom.b
    r_centers = mmap.inverse(grid.centers)
    k = geom.m + 1
    tau = np.diff(r_edges**k) / (k * grid.widths)
    u, v, w = (_eval(f, r_edges) for f in (profile.u, profile.v, profile.w))
    if not geom.allows_swirl and (np.any(v != 0) or np.any(w != 0)):
        raise ConfigurationError("swirl components v, w require cylindrical symmetry (m = 1)")
    for name, vel in (("u", u), ("v", v), ("w", w)):
        scale = max(1.0, float(np.max(np.abs(vel))))
        if abs(vel[0]) > 1e-10 * scale or abs(vel[-1]) > 1e-10 * scale:
            raise ConfigurationError(f"initial {name} must vanish at r = a and r = b")
        vel[0] = vel[-1] = 0.0
    theta = _eval(profile.theta, r_centers)
    h = 1e-6 * (geom.b - geom.a)
    for r0, sign in ((geom.a, 1.0), (geom.b, -1.0)):
        slope = (_eval(profile.theta, np.array([r0 + sign * h]))[0] - _eval(profile.theta, np.array([r0]))[0]) / h
        if abs(slope) > 1e-3 * max(1.0, float(np.max(np.abs(theta)))):
            log.warning("initial temperature gradient %.3e at r=%g violates the insulated boundary", slope, r0)
    state = State(0.0, tau, theta, u, v, w, radius_from_tau(tau, geom, grid))
    state.check()
    return state


def _lagrange_weights(nodes, x):
    nodes = np.asarray(nodes, dtype=float)
    w = np.ones(nodes.size)
    for i in range(nodes.size):
        for j in range(nodes.size):
            if i != j:
                w[i] *= (x - nodes[j]) / (nodes[i] - nodes[j])
    return w


def _edge_values_from_averages(Y, dx):
    """dY/dx at every edge from exact edge values Y, fourth order."""
    n = Y.size - 1
    out = np.empty(n + 1)
    if n < 4:
        out[:] = np.gradient(Y, dx, edge_order=2)
        return out
    out[2:-2] = (Y[:-4] - 8.0 * Y[1:-3] + 8.0 * Y[3:-1] - Y[4:]) / (12.0 * dx)
    c0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
    c1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0
    out[0] = c0 @ Y[:5] / dx
    out[1] = c1 @ Y[:5] / dx
    out[-1] = -(c0 @ Y[::-1][:5]) / dx
    out[-2] = -(c1 @ Y[::-1][:5]) / dx
    return out


def _centers_to_edges(f):
    """Fourth-order interpolation of cell-center samples to edges (uniform grid)."""
    n = f.size
    out = np.empty(n + 1)
    if n < 4:
        out[1:-1] = 0.5 * (f[:-1] + f[1:])
        out[0], out[-1] = f[0], f[-1]
        return out
    out[2:-2] = (-f[:-3] + 9.0 * f[1:-2] + 9.0 * f[2:-1] - f[3:]) / 16.0
    nodes = np.array([0.5, 1.5, 2.5, 3.5])
    w0, w1 = _lagrange_weights(nodes, 0.0), _lagrange_weights(nodes, 1.0)
    out[0], out[1] = w0 @ f[:4], w1 @ f[:4]
    out[-1], out[-2] = w0 @ f[::-1][:4], w1 @ f[::-1][:4]
    return out


def lagrangian_to_eulerian(state: State, geom: Geometry, grid: MassGrid):
    """Eulerian view of a State at the edge radii: columns r, rho, u, v, w, theta.

    Density and temperature are reconstructed to fourth order from the cell
    data, so smooth profiles survive the round trip essentially exactly.
    """
    dx = grid.dx
    k = geom.m + 1
    Y = state.r**k / k
    tau_edges = _edge_values_from_averages(Y, dx)
    return {
        "r": state.r.copy(),
        "rho": 1.0 / tau_edges,
        "u": state.u.copy(),
        "v": state.v.copy(),
        "w": state.w.copy(),
        "theta": _centers_to_edges(state.theta),
    }
