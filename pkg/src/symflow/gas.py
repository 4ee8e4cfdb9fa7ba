"""Ideal polytropic equation of state and temperature dependent transport laws.

All coefficient functions accept scalars or numpy arrays of temperature and
return arrays of the same shape.  Laws are immutable; one instance may be
shared by any number of concurrent simulations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConstitutiveError, DomainError, ExtrapolationError

DEFAULT_SWEEP = (0.1, 10.0)


@dataclass(frozen=True)
class GasParams:
    """Equation-of-state constants.  ``cv`` is derived, never passed in."""

    gamma: float
    R: float = 1.0
    cv: float = field(init=False)

    def __post_init__(self):
        if not self.R > 0:
            raise DomainError(f"gas constant R must be positive, got {self.R}", "R")
        if not self.gamma > 1:
            raise DomainError(f"adiabatic exponent must exceed 1, got {self.gamma}", "gamma")
        object.__setattr__(self, "cv", self.R / (self.gamma - 1.0))


def _require_positive(values, name):
    arr = np.asarray(values, dtype=float)
    if not np.all(arr > 0):
        raise DomainError(f"{name} must be positive (min {np.min(arr)!r})", name)
    return arr


def pressure(tau, theta, gas: GasParams):
    """P = R theta / tau."""
    tau = _require_positive(tau, "tau")
    theta = _require_positive(theta, "theta")
    return gas.R * theta / tau


def internal_energy(theta, gas: GasParams):
    """e = c_v theta."""
    theta = _require_positive(theta, "theta")
    return gas.cv * theta


class TransportLaw:
    """Base class for mu(theta), lambda(theta), kappa(theta).

    Subclasses implement ``_coefficients`` and ``_derivatives``; the public
    entry points are :func:`transport_eval` and :func:`transport_derivative`.
    ``d`` is the spatial dimension entering the constraint 2 mu + d lambda > 0.
    """

    d: int = 3

    def _coefficients(self, theta):
        raise NotImplementedError

    def _derivatives(self, theta):
        raise NotImplementedError

    def _check_range(self, theta):
        pass

    def check_positivity(self, theta, mu, lam, kappa):
        bad = ~((mu > 0) & (kappa > 0) & (2.0 * mu + self.d * lam > 0))
        if np.any(bad):
            at = np.atleast_1d(theta)[np.atleast_1d(bad)][0]
            raise ConstitutiveError(
                f"{type(self).__name__} violates mu>0, kappa>0, 2mu+{self.d}lambda>0 "
                f"at theta={at:.6g}"
            )

    def validate(self, theta_min=DEFAULT_SWEEP[0], theta_max=DEFAULT_SWEEP[1], samples=2001):
        """Sweep ``[theta_min, theta_max]`` and raise on a constraint violation."""
        if not 0 < theta_min < theta_max:
            raise DomainError("validation sweep needs 0 < theta_min < theta_max", "theta")
        sweep = np.geomspace(theta_min, theta_max, samples)
        mu, lam, kappa = self._coefficients(sweep)
        self.check_positivity(sweep, mu, lam, kappa)


@dataclass(frozen=True)
class PowerLaw(TransportLaw):
    """mu = mu_bar theta^s, lambda = lambda_bar theta^s, kappa = kappa_bar theta^s.

    For an intermolecular potential r^{-a} the kinetic exponent is
    s = (a + 4) / (2a); use :meth:`from_potential` for that family.
    """

    mu_bar: float = 1.0
    lambda_bar: float = 0.0
    kappa_bar: float = 1.0
    exponent: float = 0.5
    d: int = 3

    @classmethod
    def from_potential(cls, a, mu_bar=1.0, lambda_bar=0.0, kappa_bar=1.0, d=3):
        if not a > 0:
            raise DomainError(f"potential exponent a must be positive, got {a}", "a")
        return cls(mu_bar, lambda_bar, kappa_bar, (a + 4.0) / (2.0 * a), d)

    def _coefficients(self, theta):
        scale = np.power(theta, self.exponent)
        return self.mu_bar * scale, self.lambda_bar * scale, self.kappa_bar * scale

    def _derivatives(self, theta):
        dscale = self.exponent * np.power(theta, self.exponent - 1.0)
        return self.mu_bar * dscale, self.lambda_bar * dscale, self.kappa_bar * dscale


@dataclass(frozen=True)
class ConstantLaw(TransportLaw):
    mu: float = 1.0
    lam: float = 0.0
    kappa: float = 1.0
    d: int = 3

    def _coefficients(self, theta):
        ones = np.ones_like(theta, dtype=float)
        return self.mu * ones, self.lam * ones, self.kappa * ones

    def _derivatives(self, theta):
        zeros = np.zeros_like(theta, dtype=float)
        return zeros, zeros.copy(), zeros.copy()


class TabulatedLaw(TransportLaw):
    """Monotone cubic (PCHIP) interpolation through (theta, mu, lambda, kappa) knots.

    Only positivity and continuity are checked; C^3 smoothness of the data is
    not certified.
    """

    def __init__(self, theta, mu, lam, kappa, d=3):
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or theta.size < 2:
            raise DomainError("tabulated law needs at least two knots", "theta")
        if not np.all(np.diff(theta) > 0):
            raise DomainError("tabulated knots must be strictly increasing in theta", "theta")
        if theta[0] <= 0:
            raise DomainError("tabulated knots must lie at positive theta", "theta")
        self.d = int(d)
        self.knots = theta
        self.table = np.column_stack([mu, lam, kappa]).astype(float)
        self._interp = [PchipInterpolator(theta, self.table[:, k]) for k in range(3)]
        self._deriv = [f.derivative() for f in self._interp]
        dense = np.union1d(theta, np.linspace(theta[0], theta[-1], 2001))
        self.check_positivity(dense, *(f(dense) for f in self._interp))

    @classmethod
    def from_csv(cls, path, d=3):
        """Read a CSV with header ``theta,mu,lambda,kappa``."""
        with open(Path(path), newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise DomainError(f"empty transport table {path}", "theta")
        cols = {k.strip().lower(): k for k in rows[0]}
        try:
            keys = [cols["theta"], cols["mu"], cols["lambda"], cols["kappa"]]
        except KeyError as exc:
            raise DomainError(f"transport table {path} lacks column {exc}", "theta") from None
        data = np.array([[float(row[k]) for k in keys] for row in rows])
        return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3], d=d)

    def validate(self, theta_min=None, theta_max=None, samples=2001):
        lo = self.knots[0] if theta_min is None else max(theta_min, self.knots[0])
        hi = self.knots[-1] if theta_max is None else min(theta_max, self.knots[-1])
        super().validate(lo, hi, samples)

    def _check_range(self, theta):
        lo, hi = self.knots[0], self.knots[-1]
        if np.any(theta < lo) or np.any(theta > hi):
            raise ExtrapolationError(
                f"theta outside tabulated range [{lo:g}, {hi:g}] "
                f"(got [{np.min(theta):.6g}, {np.max(theta):.6g}])"
            )

    def _coefficients(self, theta):
        return tuple(f(theta) for f in self._interp)

    def _derivatives(self, theta):
        return tuple(f(theta) for f in self._deriv)

    def __repr__(self):
        return f"TabulatedLaw({self.knots.size} knots on [{self.knots[0]:g}, {self.knots[-1]:g}], d={self.d})"


def transport_eval(theta, law: TransportLaw):
    """Return ``(mu, lambda, kappa, nu)`` at ``theta`` with nu = 2 mu + lambda."""
    theta = _require_positive(theta, "theta")
    law._check_range(theta)
    mu, lam, kappa = law._coefficients(theta)
    law.check_positivity(theta, mu, lam, kappa)
    return mu, lam, kappa, 2.0 * mu + lam


def transport_derivative(theta, law: TransportLaw):
    """Return ``(dmu/dtheta, dnu/dtheta, dkappa/dtheta)``."""
    theta = _require_positive(theta, "theta")
    law._check_range(theta)
    dmu, dlam, dkappa = law._derivatives(theta)
    return dmu, 2.0 * dmu + dlam, dkappa
