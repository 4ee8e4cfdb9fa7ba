import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symflow.errors import ConstitutiveError, DomainError, ExtrapolationError
from symflow.gas import (ConstantLaw, GasParams, PowerLaw, TabulatedLaw, internal_energy, pressure,
                         transport_derivative, transport_eval)


def test_cv_is_derived():
    g = GasParams(1.4, R=2.0)
    assert g.cv == 2.0 / (1.4 - 1.0)


@pytest.mark.parametrize("gamma,R", [(1.0, 1.0), (0.5, 1.0), (1.4, 0.0), (1.4, -1.0)])
def test_gas_rejects_bad_constants(gamma, R):
    with pytest.raises(DomainError):
        GasParams(gamma, R)


@pytest.mark.parametrize("tau,theta,expected", [(1.0, 1.0, 1.0), (2.0, 1.0, 0.5), (1.5, 0.9, 0.6)])
def test_pressure_examples(tau, theta, expected):
    assert pressure(tau, theta, GasParams(1.4)) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("theta,gamma,expected", [(1.0, 1.4, 2.5), (2.0, 2.0, 2.0), (1.0, 1.05, 20.0)])
def test_internal_energy_examples(theta, gamma, expected):
    assert internal_energy(theta, GasParams(gamma)) == pytest.approx(expected, rel=1e-13)


def test_pressure_names_bad_field():
    with pytest.raises(DomainError) as exc:
        pressure(-1.0, 1.0, GasParams(1.4))
    assert exc.value.field == "tau"
    with pytest.raises(DomainError) as exc:
        pressure(1.0, 0.0, GasParams(1.4))
    assert exc.value.field == "theta"
    with pytest.raises(DomainError):
        internal_energy(0.0, GasParams(1.4))


@given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 100))
def test_pressure_homogeneity(tau, theta, k):
    g = GasParams(1.4)
    assert pressure(k * tau, theta, g) == pytest.approx(pressure(tau, theta, g) / k, rel=1e-12)


def test_transport_examples():
    law = PowerLaw.from_potential(4.0)
    assert law.exponent == 1.0
    assert transport_eval(2.0, law)[0] == pytest.approx(2.0)
    assert tuple(map(float, transport_eval(3.7, ConstantLaw(1.0, 0.0, 1.0)))) == (1.0, 0.0, 1.0, 2.0)
    assert transport_eval(4.0, PowerLaw(exponent=0.5))[0] == pytest.approx(2.0)


def test_transport_derivative_examples():
    assert tuple(map(float, transport_derivative(2.0, ConstantLaw()))) == (0.0, 0.0, 0.0)
    assert transport_derivative(0.3, PowerLaw(mu_bar=3.0, exponent=1.0))[0] == pytest.approx(3.0)
    assert transport_derivative(4.0, PowerLaw(exponent=0.5))[0] == pytest.approx(0.25)


def test_nu_is_two_mu_plus_lambda():
    mu, lam, _, nu = transport_eval(np.array([0.5, 2.0]), PowerLaw(mu_bar=1.3, lambda_bar=-0.4))
    assert np.allclose(nu, 2 * mu + lam)


@pytest.mark.parametrize("law", [PowerLaw(1.0, 0.2, 2.0, 0.5), PowerLaw.from_potential(2.0, lambda_bar=-0.5),
                                 ConstantLaw(1.0, 0.3, 0.7)])
def test_derivative_matches_finite_differences(law, rng):
    theta = rng.uniform(0.2, 5.0, 100)
    h = 1e-6 * theta
    dmu, dnu, dk = transport_derivative(theta, law)
    up, dn = transport_eval(theta + h, law), transport_eval(theta - h, law)
    fd = [(up[i] - dn[i]) / (2 * h) for i in range(4)]
    for analytic, numeric in ((dmu, fd[0]), (dnu, fd[3]), (dk, fd[2])):
        assert np.all(np.abs(analytic - numeric) <= 1e-6 * np.maximum(np.abs(numeric), 1.0))


def test_tabulated_derivative_matches_finite_differences(rng):
    knots = np.linspace(0.1, 10, 25)
    law = TabulatedLaw(knots, np.sqrt(knots), 0.1 * knots, knots**0.7)
    theta = rng.uniform(0.2, 5.0, 100)
    h = 1e-7
    dmu, _, dk = transport_derivative(theta, law)
    fd_mu = (transport_eval(theta + h, law)[0] - transport_eval(theta - h, law)[0]) / (2 * h)
    assert np.all(np.abs(dmu - fd_mu) <= 1e-6 * np.maximum(np.abs(fd_mu), 1.0))


@settings(max_examples=50)
@given(st.floats(0.01, 10), st.floats(-0.3, 3), st.floats(0.01, 10), st.floats(0.0, 3.0), st.integers(1, 3))
def test_valid_power_law_sweep_passes(mu_bar, lam_ratio, kappa_bar, exponent, d):
    lam = lam_ratio * mu_bar
    law = PowerLaw(mu_bar, lam, kappa_bar, exponent, d)
    if 2 * mu_bar + d * lam > 0:
        law.validate(0.01, 100.0)
    else:
        with pytest.raises(ConstitutiveError):
            law.validate(0.01, 100.0)


def test_bulk_constraint_uses_dimension():
    # 2 mu + d lambda = 2 - 3*0.8 < 0 in d = 3 but > 0 in d = 2
    PowerLaw(1.0, -0.8, 1.0, d=2).validate()
    with pytest.raises(ConstitutiveError):
        PowerLaw(1.0, -0.8, 1.0, d=3).validate()
    with pytest.raises(ConstitutiveError):
        transport_eval(1.0, PowerLaw(1.0, -0.8, 1.0, d=3))


def test_tabulated_law_checks(tmp_path):
    with pytest.raises(DomainError):
        TabulatedLaw([1.0, 1.0, 2.0], [1, 1, 1], [0, 0, 0], [1, 1, 1])
    with pytest.raises(ConstitutiveError):
        TabulatedLaw([1.0, 2.0], [1.0, -1.0], [0, 0], [1, 1])
    law = TabulatedLaw([0.5, 1.0, 2.0], [1.0, 1.5, 2.0], [0, 0, 0], [1, 2, 3])
    assert transport_eval(1.0, law)[0] == pytest.approx(1.5)
    with pytest.raises(ExtrapolationError):
        transport_eval(2.5, law)
    path = tmp_path / "t.csv"
    path.write_text("theta,mu,lambda,kappa\n0.5,1.0,0,1\n1.0,1.5,0,2\n2.0,2.0,0,3\n")
    law2 = TabulatedLaw.from_csv(path)
    assert transport_eval(1.7, law2)[2] == pytest.approx(transport_eval(1.7, law)[2])


def test_laws_are_immutable():
    law = PowerLaw()
    with pytest.raises(Exception):
        law.mu_bar = 2.0
