import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from symflow.errors import ConfigurationError, DomainError, StateValidityError
from symflow.geometry import (EulerianProfile, Geometry, MassGrid, equilibrium_radius, eulerian_to_lagrangian,
                              lagrangian_to_eulerian, mass_coordinate, radius_from_tau, validate_annulus_consistency)


def test_geometry_validation():
    with pytest.raises(ConfigurationError, match="a < b required"):
        Geometry(0, 2.0, 1.0)
    with pytest.raises(ConfigurationError):
        Geometry(2, 1.0, 2.0, "cylindrical")
    with pytest.raises(ConfigurationError):
        Geometry(-1, 1.0, 2.0)
    assert Geometry(1, 1.0, 2.0, "cylindrical").d == 3
    assert Geometry(2, 1.0, 2.0).d == 3
    assert Geometry(0, 1.0, 2.0).d == 1
    assert not Geometry(1, 1.0, 2.0).allows_swirl


def test_mass_grid_normalization():
    g = MassGrid(16)
    assert g.edges[0] == 0.0 and g.edges[-1] == 1.0
    assert np.allclose(g.widths, 1 / 16)
    with pytest.raises(ConfigurationError):
        MassGrid(3, edges=np.array([0.0, 0.5, 0.4, 1.0]))


def test_mass_coordinate_examples():
    # closed form h(b) = rho_c (b^2 - a^2)/2 and int_1^2 z^2 dz = 7/3
    _, total = mass_coordinate(lambda r: 2.0 / 3.0 + 0 * r, Geometry(1, 1.0, 2.0))
    assert total == pytest.approx(1.0, abs=1e-14)
    _, total = mass_coordinate(lambda r: 1.0 + 0 * r, Geometry(0, 0.5, 1.5))
    assert total == pytest.approx(1.0, abs=1e-14)
    rho_c = 0.8
    with pytest.raises(ConfigurationError):
        mass_coordinate(lambda r: rho_c + 0 * r, Geometry(2, 1.0, 2.0))
    _, total = mass_coordinate(lambda r: rho_c + 0 * r, Geometry(2, 1.0, 2.0), rescale=True)
    assert total == pytest.approx(rho_c * 7.0 / 3.0, rel=1e-14)


def test_mass_coordinate_rejects_nonpositive_density():
    with pytest.raises(DomainError):
        mass_coordinate(lambda r: 1.0 - r, Geometry(0, 0.5, 1.5))


def test_mass_coordinate_high_order_quadrature():
    # rho = r on [1, 2] with m = 1: h(r) = (r^3 - 1)/3, total 7/3
    mmap, total = mass_coordinate(lambda r: r, Geometry(1, 1.0, 2.0), rescale=True)
    assert total == pytest.approx(7.0 / 3.0, rel=1e-14)
    r = np.linspace(1.0, 2.0, 11)
    assert np.allclose(mmap.x_of_r(r), (r**3 - 1) / 7.0, atol=1e-14)
    x = np.linspace(0, 1, 33)
    assert np.allclose(mmap.inverse(x), (1 + 7 * x) ** (1 / 3), atol=1e-12)


def test_eulerian_to_lagrangian_examples():
    geom = Geometry(1, 1.0, 2.0)
    grid = MassGrid(32)
    st = eulerian_to_lagrangian(EulerianProfile(lambda r: 2 / 3 + 0 * r, lambda r: 1 + 0 * r), geom, grid)
    assert np.allclose(st.r, np.sqrt(1 + 3 * grid.edges), atol=1e-12)
    assert st.r[-1] == 2.0
    assert np.allclose(st.tau, 1.5, rtol=1e-12)
    geom0 = Geometry(0, 3.0, 4.0)
    st0 = eulerian_to_lagrangian(EulerianProfile(lambda r: 1 + 0 * r, lambda r: 1 + 0 * r), geom0, grid)
    assert np.allclose(st0.r, 3.0 + grid.edges, atol=1e-12)


def test_eulerian_rejects_boundary_velocity():
    geom = Geometry(0, 1.0, 2.0)
    with pytest.raises(ConfigurationError):
        eulerian_to_lagrangian(EulerianProfile(lambda r: 1 + 0 * r, lambda r: 1 + 0 * r, u=lambda r: r), geom, MassGrid(8))
    with pytest.raises(ConfigurationError):
        eulerian_to_lagrangian(EulerianProfile(lambda r: 1 + 0 * r, lambda r: 1 + 0 * r,
                                               v=lambda r: np.sin(np.pi * (r - 1))), geom, MassGrid(8))


@pytest.mark.parametrize("m,sym", [(0, "spherical"), (1, "cylindrical"), (2, "spherical")])
def test_round_trip_smooth_profile(m, sym):
    geom = Geometry(m, 1.0, 2.0, sym)
    grid = MassGrid(512)
    s = lambda r: np.sin(np.pi * (r - 1.0))  # noqa: E731
    rho = lambda r: 1.0 + 0.3 * np.cos(np.pi * (r - 1.0)) + 0.1 * r  # noqa: E731
    theta = lambda r: 1.0 + 0.2 * np.cos(np.pi * (r - 1.0))  # noqa: E731
    kw = {"v": lambda r: 0.1 * s(r), "w": lambda r: 0.2 * s(r)} if geom.allows_swirl else {}
    prof = EulerianProfile(rho, theta, u=lambda r: 0.3 * s(r), **kw)
    st = eulerian_to_lagrangian(prof, geom, grid, rescale=True)
    mmap, total = mass_coordinate(rho, geom, rescale=True)
    view = lagrangian_to_eulerian(st, geom, grid)
    r = view["r"]
    assert np.max(np.abs(view["rho"] - rho(r) / total)) < 1e-8
    assert np.max(np.abs(view["theta"] - theta(r))) < 1e-8
    assert np.max(np.abs(view["u"] - 0.3 * s(r))) < 1e-8
    validate_annulus_consistency(st.tau, geom, grid)


@pytest.mark.parametrize("m,a,tau,expected", [(1, 1.0, 1.5, 2.0), (2, 1.0, 1.0, 4 ** (1 / 3))])
def test_radius_from_tau_examples(m, a, tau, expected):
    geom = Geometry(m, a, expected)
    r = radius_from_tau(np.full(20, tau), geom, MassGrid(20))
    assert r[0] == a
    assert r[-1] == pytest.approx(expected, abs=1e-14)


def test_radius_planar_linear():
    geom = Geometry(0, 0.7, 1.2)
    grid = MassGrid(10)
    assert np.allclose(radius_from_tau(np.full(10, 0.5), geom, grid), 0.7 + 0.5 * grid.edges, atol=1e-15)


def test_radius_rejects_nonpositive():
    with pytest.raises(StateValidityError):
        radius_from_tau(np.array([1.0, -1.0]), Geometry(0, 1.0, 2.0), MassGrid(2))


def test_equilibrium_radius_examples():
    assert equilibrium_radius(1.5, Geometry(1, 1.0, 2.0), 1.0) == pytest.approx(2.0)
    assert equilibrium_radius(3.7, Geometry(2, 1.0, 2.0), 0.0) == 1.0
    assert equilibrium_radius(1.0, Geometry(0, 0.5, 1.5), 0.25) == pytest.approx(0.75)


@pytest.mark.parametrize("m", [0, 1, 2])
def test_constant_tau_matches_equilibrium_radius(m):
    geom = Geometry(m, 1.0, 2.0)
    grid = MassGrid(64)
    tb = geom.annulus_volume
    r = radius_from_tau(np.full(64, tb), geom, grid)
    assert np.max(np.abs(r - equilibrium_radius(tb, geom, grid.edges))) < 4e-16 * 64


@pytest.mark.parametrize("m,tau,ok", [(1, 1.5, True), (0, 1.0, True), (1, 1.0, False)])
def test_annulus_examples(m, tau, ok):
    geom = Geometry(m, 1.0, 2.0)
    res = validate_annulus_consistency(np.full(10, tau), geom, raise_on_failure=False)
    assert res.passed is ok
    if not ok:
        with pytest.raises(ConfigurationError, match="annulus"):
            validate_annulus_consistency(np.full(10, tau), geom)


@settings(max_examples=60)
@given(st.integers(0, 2), arrays(float, st.integers(2, 40), elements=st.floats(0.05, 5.0)))
def test_radius_monotone_and_anchored(m, weights):
    geom = Geometry(m, 1.0, 2.0)
    grid = MassGrid(weights.size)
    tau = weights / np.sum(weights * grid.widths) * geom.annulus_volume
    r = radius_from_tau(tau, geom, grid)
    assert r[0] == geom.a
    assert np.all(np.diff(r) > 0)
    if validate_annulus_consistency(tau, geom, grid, raise_on_failure=False).passed:
        assert abs(r[-1] - geom.b) < 1e-10
