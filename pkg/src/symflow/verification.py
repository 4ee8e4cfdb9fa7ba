"""Independent oracles: manufactured solutions, a planar reference solver and
a frozen-coefficient heat-mode check.

Manufactured sources are assembled from hand-coded derivatives of the
prescribed fields written in the *continuum* form of each equation, not from
the solver's operators, so agreement is a genuine consistency test.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, OracleError
from .gas import ConstantLaw, GasParams, TransportLaw, transport_derivative, transport_eval
from .geometry import Geometry, MassGrid
from .solver import SolverConfig, SourceTerms, _frame, run, thermal_step
from .state import State

log = logging.getLogger(__name__)

FIELDS = ("tau", "u", "v", "w", "theta")


# ---------------------------------------------------------------------------
# manufactured solutions


@dataclass(frozen=True)
class Jet:
    """Value and the derivatives the sources need: (f, f_x, f_xx, f_t)."""

    f: np.ndarray
    x: np.ndarray
    xx: np.ndarray
    t: np.ndarray


def _trig_mode(amp, k, kind, decay):
    """amp e^{-decay t} {sin, cos}(k pi x)."""
    kp = k * np.pi

    def jet(t, x):
        x = np.asarray(x, dtype=float)
        g = amp * np.exp(-decay * t)
        if kind == "sin":
            s, c = np.sin(kp * x), np.cos(kp * x)
            return Jet(g * s, g * kp * c, -g * kp**2 * s, -decay * g * s)
        s, c = np.sin(kp * x), np.cos(kp * x)
        return Jet(g * c, -g * kp * s, -g * kp**2 * c, -decay * g * c)

    return jet


@dataclass(frozen=True)
class ManufacturedCase:
    """tau* = tau_bar + alpha e^{-t}(x - 1/2);  u*, v*, w* sine modes;
    theta* = theta_bar + beta e^{-t} cos(pi x).

    tau* is affine in x with fixed mean, so the annulus condition holds for
    all t and r* has the closed form [a^{m+1} + (m+1) int_0^x tau*]^{1/(m+1)}.
    """

    geom: Geometry
    alpha: float = 0.2
    eps_u: float = 0.1
    eps_v: float = 0.1
    eps_w: float = 0.1
    beta: float = 0.1
    theta_bar: float = 1.0
    decay: float = 1.0
    k_v: int = 1
    k_w: int = 2
    name: str = "mms"

    def __post_init__(self):
        problems = []
        tb = self.geom.annulus_volume
        if not abs(self.alpha) < 2.0 * tb:
            problems.append("alpha must keep tau* positive: |alpha| < 2 tau_bar")
        if not abs(self.beta) < self.theta_bar:
            problems.append("beta must keep theta* positive: |beta| < theta_bar")
        if not self.geom.allows_swirl and (self.eps_v or self.eps_w):
            problems.append("swirl components need cylindrical symmetry")
        if problems:
            raise ConfigurationError("; ".join(problems), problems)

    @property
    def tau_bar(self):
        return self.geom.annulus_volume

    def tau(self, t, x):
        x = np.asarray(x, dtype=float)
        g = self.alpha * np.exp(-self.decay * t)
        zero = np.zeros_like(x)
        return Jet(self.tau_bar + g * (x - 0.5), g + zero, zero, -self.decay * g * (x - 0.5))

    def u(self, t, x):
        return _trig_mode(self.eps_u, 1, "sin", self.decay)(t, x)

    def v(self, t, x):
        return _trig_mode(self.eps_v, self.k_v, "sin", self.decay)(t, x)

    def w(self, t, x):
        return _trig_mode(self.eps_w, self.k_w, "sin", self.decay)(t, x)

    def theta(self, t, x):
        j = _trig_mode(self.beta, 1, "cos", self.decay)(t, x)
        return Jet(self.theta_bar + j.f, j.x, j.xx, j.t)

    def radius(self, t, x):
        """(r, r_x, r_xx) from the closed-form prefix integral of tau*."""
        m, a = self.geom.m, self.geom.a
        x = np.asarray(x, dtype=float)
        g = self.alpha * np.exp(-self.decay * t)
        integral = self.tau_bar * x + g * 0.5 * (x**2 - x)
        k = m + 1
        r = (a**k + k * integral) ** (1.0 / k)
        tj = self.tau(t, x)
        rx = tj.f / r**m
        rxx = (tj.x - m * tj.f * rx / r) / r**m
        return r, rx, rxx

    def exact_state(self, t, grid: MassGrid) -> State:
        xc, xe = grid.centers, grid.edges
        vel = {}
        for name in ("u", "v", "w"):
            f = getattr(self, name)(t, xe).f.copy()
            f[0] = f[-1] = 0.0
            vel[name] = f
        r = self.radius(t, xe)[0]
        r[0] = self.geom.a
        return State(t, self.tau(t, xc).f, self.theta(t, xc).f, vel["u"], vel["v"], vel["w"], r)


def manufactured_sources(case: ManufacturedCase, gas: GasParams, law: TransportLaw, t, x):
    """Evaluate (f_tau, f_u, f_v, f_w, f_theta) of ``case`` at (t, x)."""
    m = case.geom.m
    R, cv = gas.R, gas.cv
    T, U, V, W, TH = case.tau(t, x), case.u(t, x), case.v(t, x), case.w(t, x), case.theta(t, x)
    r, rx, rxx = case.radius(t, x)
    tau, th = T.f, TH.f
    mu, _, kap, nu = transport_eval(th, law)
    dmu, dnu, dkap = transport_derivative(th, law)
    mu_x, nu_x, kap_x = dmu * TH.x, dnu * TH.x, dkap * TH.x
    rm = r**m
    rm1 = r ** (m - 1)
    rm2 = r ** (m - 2)

    def weighted_x(F, Fx, Fxx):
        """Value, x- and xx-derivatives of r^m F."""
        val = rm * F
        d1 = m * rm1 * rx * F + rm * Fx
        d2 = m * (m - 1) * rm2 * rx**2 * F + m * rm1 * rxx * F + 2 * m * rm1 * rx * Fx + rm * Fxx
        return val, d1, d2

    _, A_x, A_xx = weighted_x(U.f, U.x, U.xx)  # A = r^m u

    P = R * th / tau
    P_x = R * (TH.x * tau - th * T.x) / tau**2

    f_tau = T.t - A_x

    visc_u = rm * (nu_x * A_x / tau + nu * A_xx / tau - nu * A_x * T.x / tau**2)
    f_u = U.t - V.f**2 / r + rm * P_x - visc_u + 2 * m * rm1 * U.f * mu_x

    def shear(F):
        """r^m [mu r^m F_x / tau]_x."""
        inner_x = (mu_x * rm * F.x + mu * m * rm1 * rx * F.x + mu * rm * F.xx) / tau - mu * rm * F.x * T.x / tau**2
        return rm * inner_x

    swirl_x = m * (mu_x * rm1 * V.f + mu * (m - 1) * rm2 * rx * V.f + mu * rm1 * V.x)
    f_v = V.t + U.f * V.f / r - (shear(V) + 2 * mu * V.x - swirl_x - mu * tau * V.f / rm**2)
    f_w = W.t - (shear(W) + m * mu * rm1 * W.x)

    r2m = rm**2
    cond = (kap_x * r2m * TH.x + kap * 2 * m * rm * rm1 * rx * TH.x + kap * r2m * TH.xx) / tau - kap * r2m * TH.x * T.x / tau**2
    g_x = (m - 1) * rm2 * rx * U.f**2 + 2 * rm1 * U.f * U.x
    Q = nu * A_x**2 / tau - 2 * m * mu * g_x + mu * r2m * W.x**2 / tau + mu * tau * (rm * V.x / tau - V.f / rm) ** 2
    f_theta = cv * TH.t + P * A_x - cond - Q
    if not case.geom.allows_swirl:
        f_v = np.zeros_like(f_v)
        f_w = np.zeros_like(f_w)
    return {"tau": f_tau, "u": f_u, "v": f_v, "w": f_w, "theta": f_theta}


def build_sources(case: ManufacturedCase, gas: GasParams, law: TransportLaw, geom: Geometry) -> SourceTerms:
    """Source terms that make ``case`` an exact solution of the forced system."""
    if geom != case.geom:
        raise ConfigurationError("manufactured case was built for a different geometry")
    edges = np.array([0.0, 1.0])
    for name in ("u", "v", "w"):
        if np.max(np.abs(getattr(case, name)(0.0, edges).f)) > 1e-14:
            raise ConfigurationError(f"manufactured {name}* does not vanish on the boundary")
    if np.max(np.abs(case.theta(0.0, edges).x)) > 1e-12:
        raise ConfigurationError("manufactured theta* violates the insulated boundary condition")

    cache = {}

    def make(name):
        def source(t, x):
            key = (float(t), x.size, float(x[0]), float(x[-1]))
            if key not in cache:
                cache.clear()
                cache[key] = manufactured_sources(case, gas, law, t, x)
            return cache[key][name]

        return source

    return SourceTerms(**{name: make(name) for name in FIELDS})


def field_errors(state: State, case: ManufacturedCase, grid: MassGrid):
    """Discrete L2 errors of every evolved field against the exact solution."""
    exact = case.exact_state(state.t, grid)
    dx = 1.0 / grid.N
    return {name: float(np.sqrt(np.sum((getattr(state, name) - getattr(exact, name)) ** 2) * dx)) for name in FIELDS}


@dataclass
class ConvergenceTable:
    kind: str
    resolutions: list
    errors: list = field(default_factory=list)
    orders: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def min_order(self, fields=FIELDS):
        vals = [o[f] for o in self.orders for f in fields if np.isfinite(o[f])]
        return min(vals) if vals else float("inf")

    def rows(self):
        out = []
        for i, res in enumerate(self.resolutions):
            row = {"resolution": res}
            row.update({f"err_{k}": v for k, v in self.errors[i].items()})
            if i > 0:
                row.update({f"order_{k}": v for k, v in self.orders[i - 1].items()})
            out.append(row)
        return out

    def text(self):
        lines = [f"{self.kind} convergence"]
        head = "  res      " + "  ".join(f"{f:>10s}" for f in FIELDS)
        lines.append(head)
        for i, res in enumerate(self.resolutions):
            lines.append(f"  {res:<8g} " + "  ".join(f"{self.errors[i][f]:10.3e}" for f in FIELDS))
            if i > 0:
                lines.append("   order   " + "  ".join(f"{self.orders[i - 1][f]:10.3f}" for f in FIELDS))
        for msg in self.flags:
            lines.append(f"  note: {msg}")
        return "\n".join(lines)


def _order(e_coarse, e_fine, floor=1e-14):
    if e_coarse <= floor and e_fine <= floor:
        return float("inf")
    if e_fine <= 0:
        return float("inf")
    return float(np.log2(e_coarse / e_fine))


def _fill_orders(table, active):
    for i in range(1, len(table.errors)):
        orders = {}
        for f in FIELDS:
            if f not in active:
                orders[f] = float("inf")
                continue
            orders[f] = _order(table.errors[i - 1][f], table.errors[i][f])
            if table.errors[i][f] > table.errors[i - 1][f]:
                table.flags.append(f"non-monotone error in {f} at {table.resolutions[i]}")
        table.orders.append(orders)


def _active_fields(case):
    if case.geom.allows_swirl:
        return FIELDS
    return ("tau", "u", "theta")


def convergence_study(case: ManufacturedCase, gas: GasParams, law: TransportLaw,
                      resolutions=(64, 128, 256), t_end=0.1, dt_coeff=1.0,
                      config: SolverConfig | None = None):
    """Spatial study with dt = dt_coeff * dx^2; errors against the exact solution."""
    if len(resolutions) < 3 or any(b != 2 * a for a, b in zip(resolutions, resolutions[1:])):
        raise ConfigurationError("convergence study needs >= 3 resolutions, each double the last")
    base = config or SolverConfig()
    table = ConvergenceTable("spatial", list(resolutions))
    sources = build_sources(case, gas, law, case.geom)
    for n in resolutions:
        grid = MassGrid(n)
        dt = dt_coeff / n**2
        steps = int(np.ceil(t_end / dt - 1e-9))
        cfg = _with(base, N=n)
        traj = run(case.exact_state(0.0, grid), t_end, cfg, gas, law, case.geom, grid, sources,
                   keep_states=False, fixed_dt=t_end / steps, record_fn=_no_record, audit_entropy=False)
        table.errors.append(field_errors(traj.final, case, grid))
    _fill_orders(table, _active_fields(case))
    return table


def temporal_study(case: ManufacturedCase, gas: GasParams, law: TransportLaw, N=32,
                   dts=(0.02, 0.01, 0.005, 0.0025, 0.00125), t_end=0.4, config: SolverConfig | None = None):
    """Richardson in dt at fixed N: e_k = ||S_{dt_k} - S_{dt_{k+1}}||, order log2(e_k / e_{k+1})."""
    if len(dts) < 4:
        raise ConfigurationError("temporal study needs >= 4 step sizes")
    base = _with(config or SolverConfig(), N=N)
    grid = MassGrid(N)
    sources = build_sources(case, gas, law, case.geom)
    finals = []
    for dt in dts:
        traj = run(case.exact_state(0.0, grid), t_end, base, gas, law, case.geom, grid, sources,
                   keep_states=False, fixed_dt=dt, record_fn=_no_record, audit_entropy=False)
        finals.append(traj.final)
    dx = 1.0 / N
    table = ConvergenceTable("temporal", list(dts[:-1]))
    for a, b in zip(finals, finals[1:]):
        table.errors.append({f: float(np.sqrt(np.sum((getattr(a, f) - getattr(b, f)) ** 2) * dx)) for f in FIELDS})
    _fill_orders(table, _active_fields(case))
    return table


def _no_record(state, accum, n):
    return None


def _with(config, **changes):
    from dataclasses import replace

    return replace(config, **changes)


# ---------------------------------------------------------------------------
# planar reference solver


@dataclass
class ReferenceTrajectory:
    times: list
    tau: list
    u: list
    theta: list
    steps: int

    @property
    def final(self):
        return {"t": self.times[-1], "tau": self.tau[-1], "u": self.u[-1], "theta": self.theta[-1]}


def reference_planar_solver(initial: State, t_end: float, N: int, dt: float, gas: GasParams,
                            law: TransportLaw, keep_every: int = 0) -> ReferenceTrajectory:
    """Forward-Euler integrator of the planar system

        tau_t = u_x,  u_t = -P_x + (nu u_x / tau)_x,
        c_v theta_t = -P u_x + (kappa theta_x / tau)_x + nu u_x^2 / tau

    on the same staggered layout (tau, theta per cell, u per edge) with
    insulated, no-slip ends.  Written in stress form (sigma = nu u_x / tau - P); shares no
    code with the main solver.
    """
    if initial.tau.size != N:
        raise OracleError("initial state does not match N")
    if np.any(initial.v != 0) or np.any(initial.w != 0):
        raise OracleError("reference solver handles the planar reduction only (v = w = 0)")
    h = 1.0 / N
    tau = initial.tau.astype(float).copy()
    theta = initial.theta.astype(float).copy()
    vel = initial.u.astype(float).copy()
    lim = 1e3 * (1.0 + max(np.max(np.abs(tau)), np.max(np.abs(theta)), np.max(np.abs(vel))))
    nsteps = int(round(t_end / dt))
    if abs(nsteps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise OracleError("t_end must be an integer multiple of dt")
    traj = ReferenceTrajectory([0.0], [tau.copy()], [vel.copy()], [theta.copy()], 0)
    for n in range(nsteps):
        mu, lam, kappa, _ = transport_eval(theta, law)
        visc = 2.0 * mu + lam
        pres = gas.R * theta / tau
        strain = (vel[1:] - vel[:-1]) / h            # per cell
        stress = visc * strain / tau - pres            # per cell, sigma = nu u_x/tau - P
        # momentum: u_t = sigma_x at interior faces
        acc = np.zeros(N + 1)
        acc[1:N] = (stress[1:] - stress[:-1]) / h
        # conduction flux through interior faces, zero at the ends
        k_face = 0.5 * (kappa[:-1] + kappa[1:])
        t_face = 0.5 * (tau[:-1] + tau[1:])
        flux = np.concatenate(([0.0], k_face / t_face * (theta[1:] - theta[:-1]) / h, [0.0]))
        heat = (flux[1:] - flux[:-1]) / h
        e_rate = (-pres * strain + heat + visc * strain**2 / tau) / gas.cv
        tau = tau + dt * strain
        theta = theta + dt * e_rate
        vel = vel + dt * acc
        vel[0] = vel[N] = 0.0
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(tau)) and np.all(np.isfinite(vel))) \
                or np.max(np.abs(vel)) > lim or np.min(tau) <= 0 or np.min(theta) <= 0:
            raise OracleError(f"reference solver blew up at step {n + 1}; use a smaller dt than {dt:g}")
        traj.steps += 1
        if keep_every and (n + 1) % keep_every == 0:
            traj.times.append((n + 1) * dt)
            traj.tau.append(tau.copy())
            traj.u.append(vel.copy())
            traj.theta.append(theta.copy())
    if traj.times[-1] != nsteps * dt:
        traj.times.append(nsteps * dt)
        traj.tau.append(tau)
        traj.u.append(vel)
        traj.theta.append(theta)
    return traj


def oracle_difference(state: State, ref: ReferenceTrajectory):
    """L-infinity difference of (tau, u, theta) between a main-solver state and the oracle's final state."""
    fin = ref.final
    return max(float(np.max(np.abs(state.tau - fin["tau"]))), float(np.max(np.abs(state.u - fin["u"]))),
               float(np.max(np.abs(state.theta - fin["theta"]))))


# ---------------------------------------------------------------------------
# frozen-coefficient heat mode


@dataclass(frozen=True)
class HeatModeResult:
    rate: float
    expected: float
    discrete_expected: float
    relative_error: float
    fit_r_squared: float


def heat_mode_decay(N=256, kappa=1.0, gas: GasParams | None = None, dt=1e-3, t_end=1.0, epsilon=0.01,
                    config: SolverConfig | None = None) -> HeatModeResult:
    """Decay rate of the slowest insulated mode cos(pi x) under repeated
    implicit theta substeps with tau = 1, u = v = w = 0 frozen (planar).

    The continuum rate is kappa pi^2 / c_v.  ``discrete_expected`` is the
    per-step factor 1/(1 + dt lam_h) converted to a rate with the discrete
    Neumann eigenvalue lam_h = 4 kappa sin^2(pi dx / 2) / (c_v dx^2).
    """
    from .diagnostics import fit_decay

    gas = gas or GasParams(1.4)
    law = ConstantLaw(mu=1.0, lam=0.0, kappa=kappa)
    cfg = config or SolverConfig(N=N)
    geom = Geometry(0, 1.0, 2.0)
    grid = MassGrid(N)
    x = grid.centers
    mode = np.cos(np.pi * x)
    theta = 1.0 + epsilon * mode
    state = State(0.0, np.ones(N), theta, np.zeros(N + 1), np.zeros(N + 1), np.zeros(N + 1), geom.a + grid.edges)
    fr = _frame(state, law, geom)
    D = np.zeros(N)
    Q = np.zeros(N)
    steps = int(round(t_end / dt))
    times, amps = [0.0], [float(np.sum((theta - np.mean(theta)) * mode) / np.sum(mode**2))]
    for n in range(steps):
        theta, _ = thermal_step(theta, dt, fr, D, Q, gas, law, cfg)
        times.append((n + 1) * dt)
        amps.append(float(np.sum((theta - np.mean(theta)) * mode) / np.sum(mode**2)))
    fit = fit_decay(times, amps, tail_fraction=1.0)
    expected = kappa * np.pi**2 / gas.cv
    dxh = 1.0 / N
    lam_h = 4.0 * kappa * np.sin(0.5 * np.pi * dxh) ** 2 / (gas.cv * dxh**2)
    return HeatModeResult(fit.c_gamma, expected, float(np.log1p(dt * lam_h) / dt),
                          abs(fit.c_gamma - expected) / expected, fit.r_squared)
