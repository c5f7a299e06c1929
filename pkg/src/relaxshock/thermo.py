"""Equations of state.

Three families are provided:

* :class:`BarotropicEos` -- gamma-law ``e(v) = A v^(1-gamma) / (gamma-1)``
  with pressure ``p(v) = -e'(v) = A v^(-gamma)``, the workhorse for the
  1D solver, the shock profiles and the Evans functions.
* :class:`NonbarotropicEos` -- ideal-gas-like ``e(v, s)`` with positive
  definite Hessian, used for the entropy-production checks.
* :class:`GodunovEos` -- a pressure ``p(theta, psi)`` in temperature /
  scaled-chemical-potential form together with the antiderivatives that
  feed the generating-potential machinery.

All quantities are nondimensional.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonphysicalStateError


def _require_positive(name, value):
    if np.any(np.asarray(value) <= 0.0):
        raise DomainError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class BarotropicEos:
    """Gamma-law barotropic equation of state.

    ``v`` is the specific volume (v = 1/rho).  The defaults A=1, gamma=2
    make the Rankine-Hugoniot algebra a cubic with closed-form roots,
    which every shock fixture in the test-suite exploits.
    """

    A: float = 1.0
    gamma: float = 2.0

    def __post_init__(self):
        if self.A <= 0.0:
            raise DomainError(f"pressure scale A must be > 0, got {self.A}")
        if self.gamma <= 1.0:
            raise DomainError(f"adiabatic exponent must be > 1, got {self.gamma}")

    # -- specific volume form ------------------------------------------------
    def e(self, v):
        _require_positive("specific volume", v)
        return self.A * np.asarray(v) ** (1.0 - self.gamma) / (self.gamma - 1.0)

    def p(self, v):
        _require_positive("specific volume", v)
        return self.A * np.asarray(v) ** (-self.gamma)

    def dp_dv(self, v):
        _require_positive("specific volume", v)
        return -self.A * self.gamma * np.asarray(v) ** (-self.gamma - 1.0)

    def e2(self, v):
        """Second derivative e''(v) = -p'(v); positive iff the EOS is convex."""
        return -self.dp_dv(v)

    # -- density form --------------------------------------------------------
    def p_rho(self, rho):
        _require_positive("density", rho)
        return self.A * np.asarray(rho) ** self.gamma

    def dp_drho(self, rho):
        """Squared sound speed c^2(rho)."""
        _require_positive("density", rho)
        return self.A * self.gamma * np.asarray(rho) ** (self.gamma - 1.0)

    def d2p_drho2(self, rho):
        _require_positive("density", rho)
        return self.A * self.gamma * (self.gamma - 1.0) * np.asarray(rho) ** (self.gamma - 2.0)

    def sound_speed(self, rho):
        return np.sqrt(self.dp_drho(rho))


@dataclass
class ConvexityReport:
    passed: bool
    min_value: float
    argmin_v: float
    n_samples: int


def check_convexity(eos, v_interval, n_samples=256) -> ConvexityReport:
    """Sample e''(v) on a log-spaced grid and report the worst margin.

    Passes iff e'' > 0 at every sample.  ``eos`` only needs an ``e2``
    evaluator, so synthetic counterexamples can be checked too.
    """
    lo, hi = float(v_interval[0]), float(v_interval[1])
    if lo <= 0.0 or hi <= 0.0:
        raise DomainError(f"volume interval must be positive, got {v_interval}")
    if hi <= lo:
        raise DomainError(f"empty volume interval {v_interval}")
    if n_samples < 2:
        raise DomainError("need at least 2 samples")
    v = np.geomspace(lo, hi, n_samples)
    vals = np.asarray(eos.e2(v), dtype=float)
    i = int(np.argmin(vals))
    return ConvexityReport(bool(vals[i] > 0.0), float(vals[i]), float(v[i]), n_samples)


@dataclass(frozen=True)
class NonbarotropicEos:
    """Ideal-gas-like internal energy e(v, s) = scale * v^(1-gamma) exp(a s) / (gamma-1).

    Then p = -e_v = scale v^(-gamma) exp(a s) and theta = e_s = a e, both
    positive, and the Hessian of e is positive definite for gamma > 1.
    """

    scale: float = 1.0
    gamma: float = 2.0
    a: float = 1.0

    def __post_init__(self):
        _require_positive("scale", self.scale)
        _require_positive("a", self.a)
        if self.gamma <= 1.0:
            raise DomainError(f"adiabatic exponent must be > 1, got {self.gamma}")

    def e(self, v, s):
        _require_positive("specific volume", v)
        return self.scale * np.asarray(v) ** (1.0 - self.gamma) * np.exp(self.a * np.asarray(s)) / (self.gamma - 1.0)

    def p(self, v, s):
        _require_positive("specific volume", v)
        return self.scale * np.asarray(v) ** (-self.gamma) * np.exp(self.a * np.asarray(s))

    def theta(self, v, s):
        """Temperature theta = e_s."""
        return self.a * self.e(v, s)

    def hessian(self, v, s):
        """Analytic Hessian of e with respect to (v, s)."""
        ev = self.e(v, s)
        e_vv = self.gamma * self.scale * v ** (-self.gamma - 1.0) * np.exp(self.a * s)
        e_vs = -self.a * self.p(v, s)
        e_ss = self.a ** 2 * ev
        return np.array([[e_vv, e_vs], [e_vs, e_ss]])


@dataclass(frozen=True)
class GodunovEos:
    """Pressure in Godunov form, p(theta, psi) = c0 theta^n exp(psi).

    psi is the chemical potential divided by temperature.  The family has
    closed-form antiderivatives in both arguments, so every generating
    potential built on it can be checked against finite differences:

    * ``x_psi``  -- int p dpsi            (psi-antiderivative)
    * ``x_theta`` -- int p dtheta          (theta-antiderivative)
    * ``x_rel``  -- int p theta^-3 dtheta (the weight the relativistic
      generating potential needs; requires n != 2)
    """

    c0: float = 1.0
    n: float = 4.0

    def __post_init__(self):
        _require_positive("c0", self.c0)
        if self.n <= 1.0:
            raise DomainError(f"exponent n must be > 1, got {self.n}")

    def p(self, theta, psi):
        _require_positive("temperature", theta)
        return self.c0 * np.asarray(theta) ** self.n * np.exp(np.asarray(psi))

    def p_theta(self, theta, psi):
        return self.n * self.p(theta, psi) / np.asarray(theta)

    def p_psi(self, theta, psi):
        return self.p(theta, psi)

    def x_psi(self, theta, psi):
        return self.p(theta, psi)

    def x_theta(self, theta, psi):
        return self.c0 * np.asarray(theta) ** (self.n + 1.0) * np.exp(np.asarray(psi)) / (self.n + 1.0)

    def x_rel(self, theta, psi):
        if abs(self.n - 2.0) < 1e-12:
            raise DomainError("n = 2 has no power-law theta^-3-weighted antiderivative")
        return self.c0 * np.asarray(theta) ** (self.n - 2.0) * np.exp(np.asarray(psi)) / (self.n - 2.0)

    def x_rel_psi(self, theta, psi):
        """psi-derivative of x_rel (same power law for the exponential family)."""
        return self.x_rel(theta, psi)


class NumericGodunovEos:
    """p(theta, psi) obtained by numerically inverting a NonbarotropicEos.

    Given (theta, psi) this solves theta = e_s(v, s), psi = g / theta with
    g = e + p v - theta s by Newton iteration and evaluates p(v, s).  The
    antiderivatives are fixed-order Gauss-Legendre quadratures from a
    reference point, adequate for the chart spot-checks; the analytic
    exponential family is the default everywhere performance matters.
    """

    _GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)

    def __init__(self, base: NonbarotropicEos, psi_ref=0.0, theta_ref=1.0):
        self.base = base
        self.psi_ref = float(psi_ref)
        self.theta_ref = float(theta_ref)

    def _invert(self, theta, psi):
        b = self.base
        # For e = scale v^(1-g) e^(as)/(g-1): theta = a e fixes e; then
        # g_chem = e + p v - theta s with p v = (g-1) e.
        # Solve the 2x2 system for (v, s) by Newton from a crude seed.
        theta = float(theta)
        psi = float(psi)
        if theta <= 0.0:
            raise DomainError("temperature must be positive")
        v, s = 1.0, 0.0
        for _ in range(80):
            e = b.e(v, s)
            p = b.p(v, s)
            f1 = b.a * e - theta
            f2 = (e + p * v - theta * s) / theta - psi
            if abs(f1) + abs(f2) < 1e-14 * (1.0 + theta + abs(psi)):
                break
            # Jacobian in (v, s)
            d_e_v, d_e_s = -p, b.a * e
            d_p_v = -b.gamma * p / v
            d_p_s = b.a * p
            j11 = b.a * d_e_v
            j12 = b.a * d_e_s
            j21 = (d_e_v + d_p_v * v + p) / theta
            j22 = (d_e_s + d_p_s * v - theta) / theta
            det = j11 * j22 - j12 * j21
            dv = -(f1 * j22 - f2 * j12) / det
            ds = -(j11 * f2 - j21 * f1) / det
            step = 1.0
            while v + step * dv <= 0.0:
                step *= 0.5
            v += step * dv
            s += step * ds
        else:
            raise NonphysicalStateError(f"EOS inversion stalled at theta={theta}, psi={psi}")
        return v, s

    def p(self, theta, psi):
        v, s = self._invert(theta, psi)
        return self.base.p(v, s)

    def _quad(self, f, a, b):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        return half * sum(w * f(mid + half * x) for x, w in zip(self._GL_NODES, self._GL_WEIGHTS))

    def x_psi(self, theta, psi):
        return self._quad(lambda q: self.p(theta, q), self.psi_ref, psi)

    def x_theta(self, theta, psi):
        return self._quad(lambda t: self.p(t, psi), self.theta_ref, theta)

    def x_rel(self, theta, psi):
        return self._quad(lambda t: self.p(t, psi) / t ** 3, self.theta_ref, theta)


def invert_godunov_eos(geos, theta, psi, step=1e-6):
    """Physical (rho, p) at a Godunov-form state.

    The density is the psi-derivative of p/theta at fixed theta (central
    difference), which is the Gibbs-Duhem relation in these variables.
    """
    if theta <= 0.0:
        raise DomainError(f"temperature must be positive, got {theta}")
    p = float(geos.p(theta, psi))
    rho = (geos.p(theta, psi + step) - geos.p(theta, psi - step)) / (2.0 * step * theta)
    rho = float(rho)
    if rho <= 0.0:
        raise NonphysicalStateError(f"nonphysical density {rho} at theta={theta}, psi={psi}")
    return rho, p
