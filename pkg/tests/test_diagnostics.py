import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symflow import diagnostics as dg
from symflow.errors import DomainError
from symflow.gas import GasParams, PowerLaw
from symflow.geometry import Geometry, MassGrid, radius_from_tau
from symflow.presets import InitialPreset, build_preset
from symflow.state import State

# Kanel functional at tau/tau_bar = 2 and 1/2, from 30-digit mpmath quadrature (frozen)
PHI_2 = 0.184170844994114709658
PHI_HALF = -0.157837858158746746044


def planar_state(tau, theta, u=None):
    n = tau.size
    geom = Geometry(0, 1.0, 1.0 + float(np.mean(tau)))
    grid = MassGrid(n)
    z = np.zeros(n + 1)
    return State(0.0, tau, theta, z.copy() if u is None else u, z.copy(), z.copy(), radius_from_tau(tau, geom, grid)), geom


def test_conserved_means_examples():
    n = 64
    s, _ = planar_state(np.full(n, 1.3), np.full(n, 0.7))
    assert dg.conserved_means(s, GasParams(1.4)) == pytest.approx((1.3, 0.7), rel=1e-15)
    x = np.linspace(0, 1, n + 1)
    u = np.sin(np.pi * x)
    u[0] = u[-1] = 0.0
    u *= np.sqrt(0.2 / (np.sum(u**2) / n))
    s, _ = planar_state(np.ones(n), np.ones(n), u)
    _, theta_bar = dg.conserved_means(s, GasParams(1.4))
    assert theta_bar == pytest.approx(1.04, rel=1e-13)


def test_total_energy_over_cv_is_theta_bar():
    geom = Geometry(1, 1.0, 2.0, "cylindrical")
    s = build_preset(InitialPreset("combined", 0.2), geom, MassGrid(40))
    gas = GasParams(1.1)
    assert dg.total_energy(s, gas) / gas.cv == pytest.approx(dg.conserved_means(s, gas)[1], rel=1e-14)


def test_relative_entropy_examples():
    gas = GasParams(1.4)
    s, _ = planar_state(np.full(8, 1.5), np.full(8, 1.2))
    assert dg.relative_entropy(s, 1.2, 1.5, gas) == 0.0
    s, _ = planar_state(np.full(8, 2.0), np.ones(8))
    assert dg.relative_entropy(s, 1.0, 1.0, gas) == pytest.approx(1 - np.log(2), rel=1e-14)
    with pytest.raises(DomainError):
        bad, _ = planar_state(np.full(8, 1.0), np.ones(8))
        bad.theta[3] = -1.0
        dg.relative_entropy(bad, 1.0, 1.0, gas)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.2, 3.0))
def test_relative_entropy_nonnegative(seed, theta_hat):
    rng = np.random.default_rng(seed)
    n = 16
    tau = rng.uniform(0.2, 3.0, n)
    s, _ = planar_state(tau, rng.uniform(0.2, 3.0, n))
    assert dg.relative_entropy(s, theta_hat, float(np.mean(tau)), GasParams(1.3)) >= 0.0


def test_phi_stable_near_one():
    z = 1 + np.array([1e-9, -1e-9, 1e-5])
    assert np.allclose(dg.phi(z), 0.5 * (z - 1) ** 2 - (z - 1) ** 3 / 3, rtol=1e-6)


def test_kanel_examples():
    assert dg.kanel_Phi(1.7, 1.7) == 0.0
    assert dg.kanel_Phi(2.0, 1.0) == pytest.approx(PHI_2, abs=1e-10)
    assert dg.kanel_Phi(0.5, 1.0) == pytest.approx(PHI_HALF, abs=1e-10)
    z = np.linspace(1.0, 2.0, 400001)
    from scipy.integrate import trapezoid

    assert abs(dg.kanel_Phi(3.0, 1.5) - trapezoid(np.sqrt(dg.phi(z)) / z, z)) < 1e-8
    with pytest.raises(DomainError):
        dg.kanel_Phi(0.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(0.05, 20.0))
def test_kanel_strictly_increasing(a, b):
    if abs(a - b) < 1e-6:
        return
    lo, hi = sorted((a, b))
    assert dg.kanel_Phi(lo, 1.0) < dg.kanel_Phi(hi, 1.0)


def test_kanel_max_uses_extremes():
    s, _ = planar_state(np.array([0.5, 1.0, 1.5, 1.0]), np.ones(4))
    brute = max(abs(dg.kanel_Phi(t, 1.0)) for t in s.tau)
    assert dg.kanel_Phi_max(s, 1.0) == pytest.approx(brute, rel=1e-14)


def test_h1_deviation_sine():
    eps = 0.01
    errs = []
    exact = eps * np.sqrt(0.5 + 2 * np.pi**2)
    for n in (128, 256, 512):
        x = (np.arange(n) + 0.5) / n
        s, _ = planar_state(1.0 + eps * np.sin(2 * np.pi * x), np.ones(n))
        errs.append(abs(dg.h1_deviation(s, 1.0, 1.0) - exact))
    assert errs[-1] < 1e-4 * exact
    assert np.log2(errs[0] / errs[1]) > 1.5 and np.log2(errs[1] / errs[2]) > 1.5


def test_h1_homogeneous():
    geom = Geometry(1, 1.0, 2.0, "cylindrical")
    grid = MassGrid(32)
    s = build_preset(InitialPreset("combined", 0.05), geom, grid)
    tb, thb = geom.annulus_volume, 1.0
    double = State(0.0, tb + 2 * (s.tau - tb), thb + 2 * (s.theta - thb), 2 * s.u, 2 * s.v, 2 * s.w, s.r)
    assert dg.h1_deviation(double, tb, thb) == pytest.approx(2 * dg.h1_deviation(s, tb, thb), rel=1e-14)
    eq = build_preset(InitialPreset("equilibrium"), geom, grid)
    assert dg.h1_deviation(eq, tb, 1.0) == 0.0


def test_energy_functionals():
    gas, law = GasParams(1.4), PowerLaw()
    geom = Geometry(1, 1.0, 2.0, "cylindrical")
    grid = MassGrid(64)
    eq = build_preset(InitialPreset("equilibrium"), geom, grid)
    assert all(v == 0.0 for v in dg.energy_functionals(eq, gas, law, geom, geom.annulus_volume, 1.0))
    alphas = []
    rng = np.random.default_rng(7)
    for _ in range(20):
        comps = ("u", "v", "w")
        s = build_preset(InitialPreset("combined", float(rng.uniform(0.01, 0.3)), int(rng.integers(1, 4)),
                                       components=comps), geom, grid)
        H = dg.energy_functionals(s, gas, law, geom, geom.annulus_volume, 1.0)
        assert H[1] >= 0 and H[2] >= 0 and H[3] >= 0 and H[0] >= 0
        alphas.append(H[4] / (H[1] + H[3]))
    # measured sandwich constant for H_0 <= alpha (H_tau + H_U) on this data class
    assert max(alphas) < 5.0


def test_r_deviation_bounded_by_tau_deviation():
    geom = Geometry(2, 1.0, 2.0)
    grid = MassGrid(128)
    tb = geom.annulus_volume
    betas = []
    for eps in (0.01, 0.05, 0.2):
        for k in (1, 2, 3):
            s = build_preset(InitialPreset("tau-bump", eps, k), geom, grid)
            zero_dev = dg.h1_deviation(s, tb, 1.0)
            betas.append(dg.r_deviation_h2(s, tb, geom, grid) / zero_dev)
    assert max(betas) < 2.0


def test_entropy_balance_constant_state():
    gas, law = GasParams(1.4), PowerLaw()
    geom = Geometry(0, 1.0, 2.0)
    s = build_preset(InitialPreset("equilibrium"), geom, MassGrid(16))
    recs = [dg.make_record(s, gas, law, geom, None, 1.0, 1.0) for _ in range(3)]
    res, acc = dg.entropy_balance_residual(recs)
    assert np.all(res == 0.0) and acc == 0.0
    with pytest.raises(DomainError):
        dg.entropy_balance_residual(recs[:1])


def test_fit_decay_exact():
    t = np.linspace(0, 10, 50)
    fit = dg.fit_decay(t, 3 * np.exp(-0.7 * t))
    assert fit.C_gamma == pytest.approx(3.0, abs=1e-10)
    assert fit.c_gamma == pytest.approx(0.7, abs=1e-10)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.window[0] == pytest.approx(t[20])


def test_fit_decay_noise_monte_carlo():
    t = np.linspace(0, 10, 60)
    rates = []
    for seed in range(200):
        rng = np.random.default_rng(seed)
        rates.append(dg.fit_decay(t, 3 * np.exp(-0.7 * t) * (1 + 0.01 * rng.standard_normal(t.size))).c_gamma)
    assert np.all(np.abs(np.array(rates) - 0.7) < 0.05 * 0.7)


def test_fit_decay_degenerate_and_short():
    t = np.linspace(0, 1, 40)
    with pytest.raises(dg.DegenerateFitError):
        dg.fit_decay(t, np.full(40, 1e-14))
    with pytest.raises(DomainError):
        dg.fit_decay(t[:5], np.ones(5))


def test_make_record_invariants():
    gas, law = GasParams(1.4), PowerLaw()
    geom = Geometry(1, 1.0, 2.0, "cylindrical")
    s = build_preset(InitialPreset("combined", 0.1), geom, MassGrid(32))
    tb, thb = dg.conserved_means(s, gas)
    rec = dg.make_record(s, gas, law, geom, None, tb, thb)
    assert rec.mean_tau > 0 and rec.relative_entropy >= 0
    assert rec.H_tau >= 0 and rec.H_theta >= 0 and rec.H_U >= 0
    assert rec.total_energy / gas.cv == pytest.approx(thb, rel=1e-14)
    assert set(dg.RECORD_FIELDS) == set(dg.RECORD_META)
