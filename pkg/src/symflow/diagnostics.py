"""Functionals of the analysis evaluated on grid states.

Quadrature conventions (uniform grid, dx = 1/N):

* cell fields (tau, theta): midpoint rule;
* edge fields (u, v, w, r): trapezoid rule, i.e. ``sum(f**2) * dx`` when the
  end values vanish, which is also the kinetic-energy quadrature the solver
  conserves exactly;
* derivatives of cell fields live at the edges (one-sided copies at the two
  boundary edges, weighted by dx/2); derivatives of edge fields live at cells.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, SymflowError
from .gas import GasParams, TransportLaw, transport_eval
from .geometry import Geometry, MassGrid, equilibrium_radius
from .solver import _cell_dissipation, _frame, _heat_conductance
from .state import State


class DegenerateFitError(SymflowError):
    """Every sample in the fit window sits below the noise floor."""


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    step: int
    mean_tau: float
    total_energy: float
    relative_entropy: float
    entropy_production: float
    production_accum: float
    kanel_Phi_max: float
    H_eta: float
    H_tau: float
    H_theta: float
    H_U: float
    H_0: float
    h1_deviation: float
    tau_min: float
    tau_max: float
    theta_min: float
    theta_max: float
    r_deviation_h2: float

    def as_dict(self):
        return asdict(self)


RECORD_FIELDS = [f.name for f in fields(DiagnosticsRecord)]

# (symbol, unit) for the CSV header.
RECORD_META = {
    "t": ("t", "time"),
    "step": ("n", "count"),
    "mean_tau": ("int tau dx", "volume/mass"),
    "total_energy": ("int [c_v theta + |U|^2/2] dx", "energy/mass"),
    "relative_entropy": ("int eta_theta_hat dx", "energy/mass"),
    "entropy_production": ("int theta_hat[kappa r^2m theta_x^2/(tau theta^2) + Q/theta] dx", "energy/mass/time"),
    "production_accum": ("int_0^t production ds", "energy/mass"),
    "kanel_Phi_max": ("max |Phi(tau)|", "1"),
    "H_eta": ("H_eta", "energy/mass"),
    "H_tau": ("H_tau", "1"),
    "H_theta": ("H_theta", "1"),
    "H_U": ("H_U", "1"),
    "H_0": ("H_0", "1"),
    "h1_deviation": ("||(tau-tau_bar,u,v,w,theta-theta_bar)||_H1", "1"),
    "tau_min": ("min tau", "volume/mass"),
    "tau_max": ("max tau", "volume/mass"),
    "theta_min": ("min theta", "temperature"),
    "theta_max": ("max theta", "temperature"),
    "r_deviation_h2": ("||r-r_bar||_H2", "length"),
}


def _dx(state):
    return 1.0 / state.tau.size


def _cell_integral(f, dx):
    return float(np.sum(f) * dx)


def _edge_integral(f, dx):
    return float((np.sum(f[1:-1]) + 0.5 * (f[0] + f[-1])) * dx)


def _kinetic(state):
    return state.u**2 + state.v**2 + state.w**2


def _cell_gradient_at_edges(f, dx):
    """Cell-field derivative at all N+1 edges (one-sided copies at the ends)."""
    inner = np.diff(f) / dx
    return np.concatenate([[inner[0]], inner, [inner[-1]]])


def conserved_means(state: State, gas: GasParams):
    """(tau_bar, theta_bar): mean specific volume and total energy over c_v."""
    dx = _dx(state)
    tau_bar = _cell_integral(state.tau, dx)
    theta_bar = _cell_integral(state.theta, dx) + _edge_integral(_kinetic(state), dx) / (2.0 * gas.cv)
    return tau_bar, theta_bar


def total_energy(state: State, gas: GasParams):
    dx = _dx(state)
    return gas.cv * _cell_integral(state.theta, dx) + 0.5 * _edge_integral(_kinetic(state), dx)


def phi(z):
    """z - ln z - 1, evaluated without cancellation near z = 1."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise DomainError("phi needs a positive argument", "z")
    return (z - 1.0) - np.log1p(z - 1.0)


def relative_entropy(state: State, theta_hat: float, tau_bar: float, gas: GasParams):
    """int [R theta_hat phi(tau/tau_bar) + |U|^2/2 + c_v theta_hat phi(theta/theta_hat)] dx."""
    if np.any(state.tau <= 0) or np.any(state.theta <= 0):
        raise DomainError("relative entropy needs tau, theta > 0", "tau/theta")
    dx = _dx(state)
    cells = gas.R * theta_hat * phi(state.tau / tau_bar) + gas.cv * theta_hat * phi(state.theta / theta_hat)
    return _cell_integral(cells, dx) + 0.5 * _edge_integral(_kinetic(state), dx)


def entropy_production(state: State, gas: GasParams, law: TransportLaw, geom: Geometry, theta_hat: float):
    """theta_hat int [kappa r^{2m} theta_x^2/(tau theta^2) + Q/theta] dx in the solver's discrete form."""
    fr = _frame(state, law, geom)
    th = state.theta
    heat = np.sum(_heat_conductance(fr, fr.kappa) * np.diff(th) ** 2 / (th[:-1] * th[1:]))
    Q = _cell_dissipation(fr, state.u, state.v, state.w, geom.allows_swirl)
    return float(theta_hat * (heat + np.sum(Q / th) * fr.dx))


def entropy_balance_residual(records):
    """Per-interval residual  dH + int production dt  between consecutive records.

    Returns ``(per_interval, accumulated_abs)``.
    """
    if len(records) < 2:
        raise DomainError("entropy balance needs at least two records", "records")
    H = np.array([r.relative_entropy for r in records])
    A = np.array([r.production_accum for r in records])
    res = np.diff(H) + np.diff(A)
    return res, float(np.sum(np.abs(res)))


def kanel_Phi(tau_value, tau_bar):
    """Phi(tau) = int_1^{tau/tau_bar} sqrt(phi(z))/z dz (negative for tau < tau_bar)."""
    if not tau_value > 0 or not tau_bar > 0:
        raise DomainError("Kanel functional needs positive arguments", "tau")
    upper = tau_value / tau_bar
    if upper == 1.0:
        return 0.0
    val, _ = quad(lambda z: np.sqrt(phi(z)) / z, 1.0, upper, epsabs=1e-12, epsrel=1e-12, limit=200)
    return float(val)


def kanel_Phi_max(state: State, tau_bar: float):
    """max_x |Phi(tau)|; Phi is monotone so only the extremes of tau matter."""
    return max(abs(kanel_Phi(float(np.min(state.tau)), tau_bar)), abs(kanel_Phi(float(np.max(state.tau)), tau_bar)))


def _h1_cell(f, dx):
    grad = _cell_gradient_at_edges(f, dx)
    return _cell_integral(f**2, dx) + _edge_integral(grad**2, dx)


def _h1_edge(f, dx):
    return _edge_integral(f**2, dx) + _cell_integral((np.diff(f) / dx) ** 2, dx)


def h1_deviation(state: State, tau_bar: float, theta_bar: float):
    """Discrete ||(tau - tau_bar, u, v, w, theta - theta_bar)||_{H^1}."""
    dx = _dx(state)
    total = _h1_cell(state.tau - tau_bar, dx) + _h1_cell(state.theta - theta_bar, dx)
    total += sum(_h1_edge(f, dx) for f in (state.u, state.v, state.w))
    return float(np.sqrt(total))


def r_deviation_h2(state: State, tau_bar: float, geom: Geometry, grid: MassGrid | None = None):
    """Discrete ||r - r_bar||_{H^2} on the edges."""
    n = state.tau.size
    dx = 1.0 / n
    x = grid.edges if grid is not None else np.linspace(0.0, 1.0, n + 1)
    e = state.r - equilibrium_radius(tau_bar, geom, x)
    first = np.diff(e) / dx
    second = np.diff(e, 2) / dx**2
    second = np.concatenate([[second[0]], second, [second[-1]]])
    total = _edge_integral(e**2, dx) + _cell_integral(first**2, dx) + _edge_integral(second**2, dx)
    return float(np.sqrt(total))


def energy_functionals(state: State, gas: GasParams, law: TransportLaw, geom: Geometry,
                       tau_bar: float, theta_bar: float):
    """(H_eta, H_tau, H_theta, H_U, H_0) used in the exponential-decay argument."""
    dx = _dx(state)
    H_eta = relative_entropy(state, theta_bar, tau_bar, gas)
    tau_x = _cell_gradient_at_edges(state.tau, dx)
    H_tau = _edge_integral(tau_x**2, dx)
    H_theta = _edge_integral(_cell_gradient_at_edges(state.theta, dx) ** 2, dx)
    H_U = sum(_cell_integral((np.diff(f) / dx) ** 2, dx) for f in (state.u, state.v, state.w))
    _, _, _, nu = transport_eval(state.theta, law)
    pad = lambda f: np.concatenate([[f[0]], 0.5 * (f[:-1] + f[1:]), [f[-1]]])  # noqa: E731
    grad = pad(nu) * tau_x / pad(state.tau)
    h0 = 0.5 * grad**2 - state.u / state.r**geom.m * grad
    return H_eta, H_tau, H_theta, H_U, _edge_integral(h0, dx)


def make_record(state: State, gas: GasParams, law: TransportLaw, geom: Geometry, grid: MassGrid | None,
                tau_bar: float, theta_bar: float, theta_hat: float | None = None,
                production_accum: float = 0.0, step: int = 0) -> DiagnosticsRecord:
    theta_hat = theta_bar if theta_hat is None else theta_hat
    H_eta, H_tau, H_theta, H_U, H_0 = energy_functionals(state, gas, law, geom, tau_bar, theta_bar)
    rel = H_eta if theta_hat == theta_bar else relative_entropy(state, theta_hat, tau_bar, gas)
    return DiagnosticsRecord(
        t=float(state.t),
        step=int(step),
        mean_tau=_cell_integral(state.tau, _dx(state)),
        total_energy=total_energy(state, gas),
        relative_entropy=rel,
        entropy_production=entropy_production(state, gas, law, geom, theta_hat),
        production_accum=float(production_accum),
        kanel_Phi_max=kanel_Phi_max(state, tau_bar),
        H_eta=H_eta,
        H_tau=H_tau,
        H_theta=H_theta,
        H_U=H_U,
        H_0=H_0,
        h1_deviation=h1_deviation(state, tau_bar, theta_bar),
        tau_min=float(np.min(state.tau)),
        tau_max=float(np.max(state.tau)),
        theta_min=float(np.min(state.theta)),
        theta_max=float(np.max(state.theta)),
        r_deviation_h2=r_deviation_h2(state, tau_bar, geom, grid),
    )


@dataclass(frozen=True)
class DecayFit:
    C_gamma: float
    c_gamma: float
    r_squared: float
    window: tuple
    samples: int


def fit_decay(times, values, tail_fraction=0.6, noise_floor=1e-12, window=None):
    """Least-squares fit of log(value) = log C - c t over the tail window.

    ``window`` overrides the tail policy with an explicit ``(t_start, t_end)``.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.size != y.size:
        raise DomainError("times and values differ in length", "series")
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
    else:
        start = int(np.floor((1.0 - tail_fraction) * t.size))
        keep = np.zeros(t.size, dtype=bool)
        keep[start:] = True
    if np.count_nonzero(keep & (y > 0)) < 10:
        raise DomainError("decay fit needs at least 10 positive samples in the window", "series")
    keep &= y > noise_floor
    if np.count_nonzero(keep) < 3:
        raise DegenerateFitError("all window samples below the noise floor; decay faster than measurable")
    tw, ly = t[keep], np.log(y[keep])
    slope, intercept = np.polyfit(tw, ly, 1)
    pred = intercept + slope * tw
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return DecayFit(float(np.exp(intercept)), float(-slope), float(min(max(r2, 0.0), 1.0)),
                    (float(tw[0]), float(tw[-1])), int(tw.size))


def ratio_trend(series, tail_fraction=0.5):
    """Max of the later part of a positive series over the max of the earlier part."""
    s = np.asarray(series, dtype=float)
    s = s[np.isfinite(s)]
    if s.size < 4:
        return float("nan")
    split = int(np.floor((1.0 - tail_fraction) * s.size))
    return float(np.max(s[split:]) / np.max(s[:split]))
