"""Time integration of the Lagrangian symmetric Navier-Stokes system.

Staggering: tau, theta (and P, mu, nu, kappa) at cell centers; u, v, w and r at
cell edges.  Every linear viscous velocity operator is written as
``-B^T W B`` with a cell-valued strain ``b = B f`` and weight ``W``, so

* the implicit momentum solves are symmetric tridiagonal, and
* the cell dissipation ``W b^2`` entering the internal-energy equation is
  exactly the kinetic energy the viscous terms remove.

Together with the adjoint pair ``P_x`` / ``(r^m u)_x`` this makes total
energy and the entropy balance exact for the semi-discrete system; the time
splitting is what makes them approximate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigurationError, StepError, SymflowError
from .gas import GasParams, TransportLaw, transport_derivative, transport_eval
from .geometry import Geometry, MassGrid, radius_from_tau, validate_annulus_consistency
from .state import State

log = logging.getLogger(__name__)

SCHEMES = ("semi-implicit", "explicit", "extrapolated")

MAX_HALVINGS = 40


@dataclass(frozen=True)
class SolverConfig:
    N: int = 128
    t_end: float = 1.0
    dt_init: float = 1e-3
    dt_min: float = 1e-12
    dt_max: float = 1e-2
    cfl_visc: float = 0.4
    cfl_acoustic: float = 0.5
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    scheme: str = "semi-implicit"
    jacobian: str = "newton"
    positivity_floor: float = 1e-8
    growth: float = 1.2

    def __post_init__(self):
        problems = []
        if self.N < 8:
            problems.append(f"solver.N must be >= 8, got {self.N}")
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            problems.append("0 < dt_min <= dt_init <= dt_max required")
        if self.scheme not in SCHEMES:
            problems.append(f"solver.scheme must be one of {SCHEMES}")
        if self.jacobian not in ("newton", "picard"):
            problems.append("solver.jacobian must be 'newton' or 'picard'")
        if self.t_end < 0:
            problems.append("solver.t_end must be non-negative")
        if problems:
            raise ConfigurationError("; ".join(problems), problems)


@dataclass
class SourceTerms:
    """Optional forcing ``f(t, x)`` added to each equation's right-hand side.

    ``tau``/``theta`` forcings are sampled at cell centers, velocity forcings
    at edges.  ``theta`` forces the internal-energy equation, i.e. it carries
    the factor c_v.
    """

    tau: Callable | None = None
    u: Callable | None = None
    v: Callable | None = None
    w: Callable | None = None
    theta: Callable | None = None

    def sample(self, name, t, x):
        fn = getattr(self, name)
        if fn is None:
            return 0.0
        return np.asarray(fn(t, x), dtype=float)


class StepRejected(SymflowError):
    """A step produced an inadmissible state; retry with a smaller dt."""


# ---------------------------------------------------------------------------
# discrete operators


@dataclass
class _Frame:
    """Geometric and constitutive coefficients frozen at one (tau, theta, r)."""

    dx: float
    m: int
    r: np.ndarray
    rm: np.ndarray
    rcm: np.ndarray
    tau: np.ndarray
    theta: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    kappa: np.ndarray


def _frame(state: State, law: TransportLaw, geom: Geometry) -> _Frame:
    n = state.tau.size
    rm = state.r**geom.m
    mu, _, kappa, nu = transport_eval(state.theta, law)
    return _Frame(1.0 / n, geom.m, state.r, rm, 0.5 * (rm[:-1] + rm[1:]), state.tau, state.theta, mu, nu, kappa)


def _u_form(fr: _Frame):
    """b = (r^m u)_x, W = nu / tau."""
    return fr.rm[:-1] / fr.dx, fr.rm[1:] / fr.dx, fr.nu / fr.tau


def _v_form(fr: _Frame):
    """b = r^m v_x / tau - v / r^m (cell averaged), W = mu tau."""
    alpha = fr.rcm / (fr.tau * fr.dx)
    beta = 0.5 / fr.rcm
    return alpha + beta, alpha - beta, fr.mu * fr.tau


def _w_form(fr: _Frame):
    """b = r^m w_x / tau, W = mu tau."""
    alpha = fr.rcm / (fr.tau * fr.dx)
    return alpha, alpha, fr.mu * fr.tau


def _strain(form, f):
    p, q, _ = form
    return q * f[1:] - p * f[:-1]


def _apply(form, f):
    """(-B^T W B f) at the interior edges."""
    p, q, W = form
    s = W * _strain(form, f)
    return p[1:] * s[1:] - q[:-1] * s[:-1]


def _bands(form):
    p, q, W = form
    upper = (p * W * q)[1:]
    lower = (q * W * p)[:-1]
    diag = -(p * p * W)[1:] - (q * q * W)[:-1]
    return lower, diag, upper


def _mu_gradient_coeff(fr: _Frame):
    """-2m r^{m-1} mu_x at interior edges (multiplies u)."""
    if fr.m == 0:
        return np.zeros(fr.r.size - 2)
    r = fr.r[1:-1]
    return -2.0 * fr.m * r ** (fr.m - 1) * np.diff(fr.mu) / fr.dx


def _divergence(fr: _Frame, u):
    """(r^m u)_x on cells."""
    return np.diff(fr.rm * u) / fr.dx


def _heat_conductance(fr: _Frame, kappa):
    """kappa r^{2m} / (tau dx) at interior edges."""
    k_edge = 0.5 * (kappa[:-1] + kappa[1:])
    tau_edge = 0.5 * (fr.tau[:-1] + fr.tau[1:])
    return k_edge * fr.rm[1:-1] ** 2 / (tau_edge * fr.dx)


def _heat_flux(fr: _Frame, theta, kappa):
    flux = np.zeros(theta.size + 1)
    flux[1:-1] = _heat_conductance(fr, kappa) * np.diff(theta)
    return flux


def _with_boundary(interior):
    out = np.zeros(interior.size + 2)
    out[1:-1] = interior
    return out


def _swirl_guard(state: State, geom: Geometry):
    if not geom.allows_swirl and (np.any(state.v != 0) or np.any(state.w != 0)):
        raise ConfigurationError("nonzero v or w requires cylindrical symmetry (m = 1)")


def residual_momentum_u(state: State, gas: GasParams, law: TransportLaw, geom: Geometry):
    """u_t = v^2/r - r^m P_x + r^m [nu (r^m u)_x / tau]_x - 2m r^{m-1} u mu_x at edges."""
    fr = _frame(state, law, geom)
    P = gas.R * state.theta / state.tau
    r = state.r[1:-1]
    inner = (
        state.v[1:-1] ** 2 / r
        - fr.rm[1:-1] * np.diff(P) / fr.dx
        + _apply(_u_form(fr), state.u)
        + _mu_gradient_coeff(fr) * state.u[1:-1]
    )
    return _with_boundary(inner)


def residual_momentum_v(state: State, gas: GasParams, law: TransportLaw, geom: Geometry):
    """v_t = -u v / r + r^m[mu r^m v_x/tau]_x + 2 mu v_x - m(mu r^{m-1} v)_x - mu tau v / r^{2m}."""
    _swirl_guard(state, geom)
    if not geom.allows_swirl:
        return np.zeros_like(state.v)
    fr = _frame(state, law, geom)
    inner = -state.u[1:-1] * state.v[1:-1] / state.r[1:-1] + _apply(_v_form(fr), state.v)
    return _with_boundary(inner)


def residual_momentum_w(state: State, gas: GasParams, law: TransportLaw, geom: Geometry):
    """w_t = r^m [mu r^m w_x / tau]_x + m mu r^{m-1} w_x at edges."""
    _swirl_guard(state, geom)
    if not geom.allows_swirl:
        return np.zeros_like(state.w)
    fr = _frame(state, law, geom)
    return _with_boundary(_apply(_w_form(fr), state.w))


def dissipation_Q(state: State, gas: GasParams, law: TransportLaw, geom: Geometry):
    """Cell viscous heating nu D^2/tau - 2m mu (r^{m-1}u^2)_x + mu r^{2m} w_x^2/tau + mu tau [..]^2."""
    fr = _frame(state, law, geom)
    return _cell_dissipation(fr, state.u, state.v, state.w, geom.allows_swirl)


def _cell_dissipation(fr: _Frame, u, v, w, swirl):
    form = _u_form(fr)
    Q = form[2] * _strain(form, u) ** 2
    if fr.m > 0:
        g = fr.r ** (fr.m - 1) * u**2
        Q = Q - 2.0 * fr.m * fr.mu * np.diff(g) / fr.dx
    if swirl:
        vf, wf = _v_form(fr), _w_form(fr)
        Q = Q + vf[2] * _strain(vf, v) ** 2 + wf[2] * _strain(wf, w) ** 2
    return Q


def residual_energy(state: State, gas: GasParams, law: TransportLaw, geom: Geometry):
    """c_v theta_t = -P (r^m u)_x + [kappa r^{2m} theta_x / tau]_x + Q on cells."""
    fr = _frame(state, law, geom)
    D = _divergence(fr, state.u)
    div = np.diff(_heat_flux(fr, state.theta, fr.kappa)) / fr.dx
    Q = _cell_dissipation(fr, state.u, state.v, state.w, geom.allows_swirl)
    return -gas.R * state.theta * D / state.tau + div + Q


def residual_tau(state: State, geom: Geometry):
    """tau_t = (r^m u)_x on cells."""
    return np.diff(state.r**geom.m * state.u) * state.tau.size


def heat_conductance(state: State, law: TransportLaw, geom: Geometry):
    """Edge conductances kappa r^{2m}/(tau dx) used by the conduction operator."""
    fr = _frame(state, law, geom)
    return _heat_conductance(fr, fr.kappa)


# ---------------------------------------------------------------------------
# time stepping


def _solve_implicit(lower, diag, upper, rhs, dt):
    ab = np.zeros((3, rhs.size))
    ab[0, 1:] = -dt * upper[:-1]
    ab[1, :] = 1.0 - dt * diag
    ab[2, :-1] = -dt * lower[1:]
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def _edge_source(sources, name, t, grid):
    if sources is None:
        return 0.0
    f = sources.sample(name, t, grid.edges)
    return f[1:-1] if np.ndim(f) else f


def _cell_source(sources, name, t, grid):
    if sources is None:
        return 0.0
    return sources.sample(name, t, grid.centers)


def thermal_step(theta_old, dt, fr_new: _Frame, D, Q, gas, law, config: SolverConfig, f_theta=0.0):
    """Implicit internal-energy update by damped Newton on a tridiagonal system.

    Solves  c_v (theta - theta_old)/dt + R theta D / tau
            = [kappa(theta) r^{2m} theta_x / tau]_x + Q + f_theta
    with insulated ends.  Returns ``(theta, iterations)``.
    """
    cv, R, dx = gas.cv, gas.R, fr_new.dx
    tau = fr_new.tau
    rm2 = fr_new.rm[1:-1] ** 2
    tau_edge = 0.5 * (tau[:-1] + tau[1:])
    geo = rm2 / (tau_edge * dx)
    use_newton = config.jacobian == "newton"

    def residual(theta):
        _, _, kappa, _ = transport_eval(theta, law)
        flux = np.zeros(theta.size + 1)
        flux[1:-1] = 0.5 * (kappa[:-1] + kappa[1:]) * geo * np.diff(theta)
        G = cv * (theta - theta_old) / dt + R * theta * D / tau - np.diff(flux) / dx - Q - f_theta
        return G, kappa

    theta = theta_old.copy()
    G, kappa = residual(theta)
    gnorm = np.max(np.abs(G))
    scale = max(1.0, float(np.max(np.abs(theta))))
    for it in range(1, config.newton_max_iter + 1):
        K = 0.5 * (kappa[:-1] + kappa[1:]) * geo
        dtheta = np.diff(theta)
        dF_right = K.copy()
        dF_left = -K.copy()
        if use_newton:
            _, _, dkappa = transport_derivative(theta, law)
            dF_right += 0.5 * dkappa[1:] * geo * dtheta
            dF_left += 0.5 * dkappa[:-1] * geo * dtheta
        diag = cv / dt + R * D / tau
        diag[:-1] -= dF_left / dx
        diag[1:] += dF_right / dx
        ab = np.zeros((3, theta.size))
        ab[0, 1:] = -dF_right / dx
        ab[1, :] = diag
        ab[2, :-1] = dF_left / dx
        delta = solve_banded((1, 1), ab, -G, check_finite=False)
        if not np.all(np.isfinite(delta)):
            raise StepRejected("non-finite Newton update")
        lam = 1.0
        while True:
            trial = theta + lam * delta
            small = lam * np.max(np.abs(delta)) <= 10.0 * config.newton_tol * scale
            if np.all(trial > 0):
                G_trial, kappa_trial = residual(trial)
                g_trial = np.max(np.abs(G_trial))
                if g_trial <= (1.0 - 1e-4 * lam) * gnorm or small:
                    break
            lam *= 0.5
            if lam < 1.0 / 1024:
                raise StepRejected("Newton line search stalled")
        theta, G, kappa, gnorm = trial, G_trial, kappa_trial, g_trial
        if lam * np.max(np.abs(delta)) <= config.newton_tol * scale:
            return theta, it
    raise StepRejected(f"Newton did not converge in {config.newton_max_iter} iterations")


def _step_semi_implicit(state, dt, config, gas, law, geom, grid, sources):
    t_new = state.t + dt
    fr = _frame(state, law, geom)
    P = gas.R * state.theta / state.tau
    r_in = state.r[1:-1]

    lower, diag, upper = _bands(_u_form(fr))
    diag = diag + _mu_gradient_coeff(fr)
    rhs = state.u[1:-1] + dt * (
        state.v[1:-1] ** 2 / r_in - fr.rm[1:-1] * np.diff(P) / fr.dx + _edge_source(sources, "u", t_new, grid)
    )
    u = _with_boundary(_solve_implicit(lower, diag, upper, rhs, dt))

    if geom.allows_swirl:
        rhs = state.v[1:-1] + dt * (-u[1:-1] * state.v[1:-1] / r_in + _edge_source(sources, "v", t_new, grid))
        v = _with_boundary(_solve_implicit(*_bands(_v_form(fr)), rhs, dt))
        rhs = state.w[1:-1] + dt * _edge_source(sources, "w", t_new, grid)
        w = _with_boundary(_solve_implicit(*_bands(_w_form(fr)), rhs, dt))
    else:
        v, w = state.v.copy(), state.w.copy()

    D = _divergence(fr, u)
    tau = state.tau + dt * (D + _cell_source(sources, "tau", t_new, grid))
    if np.min(tau) <= config.positivity_floor:
        raise StepRejected(f"tau fell to {np.min(tau):.3e}")
    r = radius_from_tau(tau, geom, grid)
    Q = _cell_dissipation(fr, u, v, w, geom.allows_swirl)

    probe = State(t_new, tau, state.theta, u, v, w, r)
    fr_new = _frame(probe, law, geom)
    theta, _ = thermal_step(state.theta, dt, fr_new, D, Q, gas, law, config, _cell_source(sources, "theta", t_new, grid))
    if np.min(theta) <= config.positivity_floor:
        raise StepRejected(f"theta fell to {np.min(theta):.3e}")
    return State(t_new, tau, theta, u, v, w, r)


def _step_explicit(state, dt, config, gas, law, geom, grid, sources):
    t = state.t
    u = state.u + dt * residual_momentum_u(state, gas, law, geom)
    v = state.v + dt * residual_momentum_v(state, gas, law, geom)
    w = state.w + dt * residual_momentum_w(state, gas, law, geom)
    if sources is not None:
        u[1:-1] += dt * _edge_source(sources, "u", t, grid)
        if geom.allows_swirl:
            v[1:-1] += dt * _edge_source(sources, "v", t, grid)
            w[1:-1] += dt * _edge_source(sources, "w", t, grid)
    tau = state.tau + dt * (residual_tau(state, geom) + _cell_source(sources, "tau", t, grid))
    theta = state.theta + dt * (residual_energy(state, gas, law, geom) + _cell_source(sources, "theta", t, grid)) / gas.cv
    if not (np.all(np.isfinite(tau)) and np.all(np.isfinite(theta))):
        raise StepRejected("non-finite explicit update")
    if min(np.min(tau), np.min(theta)) <= config.positivity_floor:
        raise StepRejected("positivity floor reached in explicit update")
    return State(t + dt, tau, theta, u, v, w, radius_from_tau(tau, geom, grid))


def _step_extrapolated(state, dt, config, gas, law, geom, grid, sources):
    """Local Richardson extrapolation of the semi-implicit step (second order)."""
    coarse = _step_semi_implicit(state, dt, config, gas, law, geom, grid, sources)
    half = _step_semi_implicit(state, 0.5 * dt, config, gas, law, geom, grid, sources)
    fine = _step_semi_implicit(half, 0.5 * dt, config, gas, law, geom, grid, sources)
    mix = {name: 2.0 * getattr(fine, name) - getattr(coarse, name) for name in ("tau", "theta", "u", "v", "w")}
    if min(np.min(mix["tau"]), np.min(mix["theta"])) <= config.positivity_floor:
        raise StepRejected("positivity floor reached after extrapolation")
    return State(state.t + dt, mix["tau"], mix["theta"], mix["u"], mix["v"], mix["w"],
                 radius_from_tau(mix["tau"], geom, grid))


_STEPPERS = {
    "semi-implicit": _step_semi_implicit,
    "explicit": _step_explicit,
    "extrapolated": _step_extrapolated,
}


def step(state: State, dt: float, config: SolverConfig, gas: GasParams, law: TransportLaw,
         geom: Geometry, grid: MassGrid | None = None, sources: SourceTerms | None = None) -> State:
    """Advance one step of size ``dt``; raises :class:`StepRejected` on failure.

    Semi-implicit splitting: (i) velocities with explicit pressure and swirl
    coupling and implicit viscous operators, (ii) tau from the new velocity
    by the telescoping edge difference, (iii) r from tau, (iv) implicit
    theta by damped Newton with the dissipation frozen at the new velocities.
    """
    if grid is None:
        grid = MassGrid(state.tau.size)
    stepper = _STEPPERS[config.scheme]
    return stepper(state, dt, config, gas, law, geom, grid, sources)


def stable_dt(state: State, config: SolverConfig, gas: GasParams, law: TransportLaw, geom: Geometry):
    """Stability cap for the terms the chosen scheme treats explicitly."""
    dx = 1.0 / state.tau.size
    rm = state.r**geom.m
    rm_cell = 0.5 * (rm[:-1] + rm[1:])
    sound = np.sqrt(gas.gamma * gas.R * state.theta / state.tau) * rm_cell / state.tau
    cap = config.cfl_acoustic * dx / np.max(sound)
    if config.scheme == "explicit":
        mu, _, kappa, nu = transport_eval(state.theta, law)
        visc = np.max(np.maximum(nu, mu) * rm_cell**2)
        heat = np.max(kappa * rm_cell**2) / gas.cv
        cap = min(cap, config.cfl_visc * dx**2 * np.min(state.tau) / max(visc, heat))
    return float(cap)


def check_compatibility(state: State, gas: GasParams, law: TransportLaw, geom: Geometry, tol=1e-6):
    """Zeroth-order boundary compatibility is enforced; first order is only warned about."""
    if any(abs(f[0]) > 0 or abs(f[-1]) > 0 for f in (state.u, state.v, state.w)):
        raise ConfigurationError("initial velocities must vanish at x = 0 and x = 1")
    _swirl_guard(state, geom)
    n = state.theta.size
    th = state.theta
    # quadratic through the three cells nearest each end, differentiated at the end
    slope = np.array([-2 * th[0] + 3 * th[1] - th[2], 2 * th[-1] - 3 * th[-2] + th[-3]]) * n
    if np.max(np.abs(slope)) > 1e-3 * max(1.0, float(np.max(th))):
        log.warning("initial theta_x at the boundary is %.3e; the insulated condition is violated", np.max(np.abs(slope)))
    ut = residual_momentum_u(state, gas, law, geom)
    ends = np.array([3 * ut[1] - 3 * ut[2] + ut[3], 3 * ut[-2] - 3 * ut[-3] + ut[-4]])
    if np.max(np.abs(ends)) > tol * max(1.0, float(np.max(np.abs(ut)))):
        log.warning("first-order compatibility: extrapolated boundary u_t = %.3e", np.max(np.abs(ends)))


# ---------------------------------------------------------------------------
# driver


@dataclass
class Trajectory:
    states: list = field(default_factory=list)
    records: list = field(default_factory=list)
    steps: int = 0
    rejections: int = 0
    status: str = "running"
    final: State | None = None
    tau_bar: float = float("nan")
    theta_bar: float = float("nan")


def run(initial: State, t_end: float, config: SolverConfig, gas: GasParams, law: TransportLaw,
        geom: Geometry, grid: MassGrid | None = None, sources: SourceTerms | None = None,
        sample_interval: float | None = None, callbacks: Sequence[Callable] = (),
        theta_hat: float | None = None, keep_states: bool = True, fixed_dt: float | None = None,
        record_fn: Callable | None = None, audit_entropy: bool = True) -> Trajectory:
    """Advance ``initial`` to ``t_end`` with adaptive steps.

    dt grows by ``config.growth`` after each accepted step, is capped by
    ``dt_max`` and :func:`stable_dt`, and is halved on rejection (at most 40
    times in a row).  Steps are clipped to land on every sample time; at each
    sample a DiagnosticsRecord is built and passed with the State to the
    callbacks.  Entropy production is accumulated by the trapezoid rule over
    every step so that entropy balances can be audited between samples
    (``audit_entropy=False`` skips this, e.g. in convergence studies).
    """
    from . import diagnostics as dg

    if grid is None:
        grid = MassGrid(initial.tau.size)
    if sources is None:
        validate_annulus_consistency(initial.tau, geom, grid)
        check_compatibility(initial, gas, law, geom)
    _swirl_guard(initial, geom)
    tau_bar, theta_bar = dg.conserved_means(initial, gas)
    theta_hat = theta_bar if theta_hat is None else theta_hat
    traj = Trajectory(tau_bar=tau_bar, theta_bar=theta_bar)
    make_record = record_fn or (lambda s, accum, n: dg.make_record(
        s, gas, law, geom, grid, tau_bar, theta_bar, theta_hat, production_accum=accum, step=n))

    interval = sample_interval if sample_interval and sample_interval > 0 else None
    state = initial
    accum = 0.0
    production = (lambda s: dg.entropy_production(s, gas, law, geom, theta_hat)) if audit_entropy else (lambda s: 0.0)
    prod_old = production(state)

    def sample(s):
        rec = make_record(s, accum, traj.steps)
        traj.records.append(rec)
        if keep_states:
            traj.states.append(s)
        for cb in callbacks:
            cb(s, rec)

    sample(state)
    n_sample = 1
    next_sample = interval if interval else t_end
    dt = fixed_dt if fixed_dt else min(config.dt_init, config.dt_max)
    halvings = 0
    eps = 1e-12 * max(1.0, t_end)
    while state.t < t_end - eps:
        if fixed_dt:
            trial = min(fixed_dt, t_end - state.t)
        else:
            dt = min(dt, config.dt_max, stable_dt(state, config, gas, law, geom))
            trial = dt
        target = min(next_sample, t_end)
        clipped = state.t + trial > target - eps
        if clipped:
            trial = target - state.t
        try:
            new = step(state, trial, config, gas, law, geom, grid, sources)
        except StepRejected as exc:
            traj.rejections += 1
            halvings += 1
            if fixed_dt:
                fixed_dt *= 0.5
            dt = 0.5 * (fixed_dt or trial)
            if halvings > MAX_HALVINGS or dt < config.dt_min:
                traj.status = "aborted"
                traj.final = state
                err = StepError(f"step failed at t={state.t:.6g}: {exc}", state)
                err.trajectory = traj
                raise err from exc
            continue
        halvings = 0
        traj.steps += 1
        prod_new = production(new)
        accum += 0.5 * trial * (prod_old + prod_new)
        prod_old = prod_new
        state = new
        if not fixed_dt and not clipped:
            dt = min(dt * config.growth, config.dt_max)
        if state.t >= target - eps:
            state = replace(state, t=target)
            sample(state)
            if interval:
                n_sample += 1
                next_sample = n_sample * interval
    traj.status = "completed"
    traj.final = state
    if not keep_states:
        traj.states = [state]
    return traj
