"""Stationary planar shock profiles of the viscous and relaxation systems.

Frame fixed by Galilean invariance: propagation direction n = +1, speed
c = 0, so end states satisfy rho u = m and m u + p(rho) = C with m != 0.
The viscous profile solves the scalar ODE

    mu_tilde U' = g(U),   g(U) = m U + p(m/U) - C,

with Sigma = -mu_tilde U'.  The relaxation profile solves the planar
system (solved-for-derivatives form)

    U'     = -Sigma / (mu_tilde D(U)),
    Sigma' =  g'(U) Sigma / (mu_tilde D(U)),      D(U) = 1 - eps m g'(U),

whose trajectories conserve the momentum integral m U + p(m/U) + Sigma
exactly; the heteroclinic lies on the leaf where that constant equals C.
Shooting starts on the unstable eigenvector of the upstream rest point and
pins the phase by U(0) = (U- + U+)/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import (DomainError, NonHyperbolicError, ProfileConnectionError,
                     ProfileError, ShockExistenceError)

_IVP_OPTS = dict(method="RK45", rtol=1e-10, atol=1e-12, dense_output=True)


@dataclass(frozen=True)
class ShockSetup:
    """Rankine-Hugoniot consistent end states in the stationary frame."""

    eos: object
    rho_minus: float
    u_minus: float
    rho_plus: float
    u_plus: float
    m: float
    momentum_const: float

    def __post_init__(self):
        m = self.m
        if abs(self.rho_minus * self.u_minus - m) > 1e-12 * abs(m) or \
           abs(self.rho_plus * self.u_plus - m) > 1e-12 * abs(m):
            raise DomainError("end states violate mass-flux consistency")
        c_m = self.m * self.u_minus + float(self.eos.p_rho(self.rho_minus))
        c_p = self.m * self.u_plus + float(self.eos.p_rho(self.rho_plus))
        if abs(c_m - c_p) > 1e-10 * max(1.0, abs(c_m)):
            raise DomainError("end states violate momentum consistency")

    def g(self, u):
        """Flux defect m u + p(m/u) - C; zero exactly at the end states."""
        return self.m * np.asarray(u) + self.eos.p_rho(self.m / np.asarray(u)) - self.momentum_const

    def dg(self, u):
        u = np.asarray(u)
        rho = self.m / u
        return self.m * (1.0 - self.eos.dp_drho(rho) / u ** 2)

    def amplitude(self):
        return abs(self.u_minus - self.u_plus)

    def sound_speeds(self):
        return (float(np.sqrt(self.eos.dp_drho(self.rho_minus))),
                float(np.sqrt(self.eos.dp_drho(self.rho_plus))))


def _bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0.0) == (flo > 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < 1e-16 * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def rankine_hugoniot(eos, rho_minus, u_minus) -> ShockSetup:
    """Downstream state of the stationary shock with the given supersonic upstream.

    Solves m u + p(m/u) = C for the second positive root by bracketing
    bisection, polished by Newton to ~1e-12; verifies the Lax conditions.
    """
    if rho_minus <= 0.0:
        raise DomainError("upstream density must be positive")
    cs_minus = float(np.sqrt(eos.dp_drho(rho_minus)))
    if u_minus <= cs_minus:
        raise DomainError(
            f"upstream must be supersonic: u={u_minus} <= c_s={cs_minus}")
    m = rho_minus * u_minus
    C = m * u_minus + float(eos.p_rho(rho_minus))

    def g(u):
        return m * u + float(eos.p_rho(m / u)) - C

    def dg(u):
        return m * (1.0 - float(eos.dp_drho(m / u)) / u ** 2)

    # sonic point: unique zero of the increasing function u^2 - c_s(m/u)^2
    def h(u):
        return u ** 2 - float(eos.dp_drho(m / u))

    lo = u_minus
    for _ in range(200):
        lo *= 0.5
        if h(lo) < 0.0:
            break
    else:
        raise ShockExistenceError("no sonic point below the upstream speed")
    u_sonic = _bisect(h, lo, u_minus)

    # g < 0 at the sonic point, g -> +inf as u -> 0+: bracket the root below
    lo = u_sonic
    for _ in range(400):
        lo *= 0.5
        if g(lo) > 0.0:
            break
    else:
        raise ShockExistenceError("no second positive root of the momentum relation")
    u_plus = _bisect(g, lo, u_sonic)
    for _ in range(8):  # Newton polish
        u_plus -= g(u_plus) / dg(u_plus)
    if not (0.0 < u_plus < u_minus):
        raise ShockExistenceError("downstream root escaped (0, u_minus)")
    rho_plus = m / u_plus
    cs_plus = float(np.sqrt(eos.dp_drho(rho_plus)))
    if not (u_plus < cs_plus):
        raise ShockExistenceError("Lax condition fails downstream")
    return ShockSetup(eos, float(rho_minus), float(u_minus), float(rho_plus),
                      float(u_plus), float(m), float(C))


def boost_setup(setup: ShockSetup, speed):
    """End states of the same shock moving at the given speed (Galilean boost)."""
    return {
        "speed": float(speed),
        "upstream": (setup.rho_minus, setup.u_minus + speed),
        "downstream": (setup.rho_plus, setup.u_plus + speed),
        "mass_flux_in_shock_frame": setup.m,
    }


# ---------------------------------------------------------------------------
# profile container
# ---------------------------------------------------------------------------

@dataclass
class ProfileSolution:
    """Sampled heteroclinic orbit (R, U, Sigma)(xi) on [-L, L].

    eps = 0 marks the viscous (Navier-Stokes) profile.  Derivatives come
    from the profile ODE itself, so they are as accurate as the samples.
    """

    setup: ShockSetup
    mu_tilde: float
    eps: float
    xi: np.ndarray
    R: np.ndarray
    U: np.ndarray
    Sigma: np.ndarray
    endpoint_residual: tuple

    def __post_init__(self):
        self._u_spline = CubicSpline(self.xi, self.U)
        if np.any(self.U <= 0.0):
            raise ProfileError("profile velocity must stay away from zero")

    @property
    def L(self) -> float:
        return float(self.xi[-1])

    @property
    def m(self) -> float:
        return self.setup.m

    def u_at(self, xi):
        """U(xi), clamped to the rest values outside the sampled window."""
        xi = np.asarray(xi, dtype=float)
        val = self._u_spline(np.clip(xi, self.xi[0], self.xi[-1]))
        return np.where(xi < self.xi[0], self.setup.u_minus,
                        np.where(xi > self.xi[-1], self.setup.u_plus, val))

    def d_factor(self, u):
        """D(U) = 1 - eps m g'(U); equals 1 identically for the viscous profile."""
        return 1.0 - self.eps * self.m * self.setup.dg(u)

    def evaluate(self, xi):
        """(R, U, Sigma) at arbitrary xi via the momentum integral."""
        u = self.u_at(xi)
        return self.m / u, u, -self.setup.g(u)

    def derivatives(self, xi):
        """(R', U', Sigma') from the ODE structure (exact given U)."""
        u = self.u_at(xi)
        g = self.setup.g(u)
        dg = self.setup.dg(u)
        if self.eps == 0.0:
            du = g / self.mu_tilde
        else:
            du = g / (self.mu_tilde * self.d_factor(u))
        return -self.m * du / u ** 2, du, -dg * du

    def momentum_integral_drift(self):
        """max |m U + p(m/U) + Sigma - C| over the samples."""
        vals = self.m * self.U + self.setup.eos.p_rho(self.m / self.U) + self.Sigma
        return float(np.max(np.abs(vals - self.setup.momentum_const)))


def _sample_window(setup, mu_tilde, eps):
    """Initial half-length from the slowest endpoint rate."""
    rates = []
    for u in (setup.u_minus, setup.u_plus):
        d = 1.0 - eps * setup.m * float(setup.dg(u))
        rates.append(abs(float(setup.dg(u))) / (mu_tilde * d))
    slowest = min(rates)
    if slowest <= 0.0:
        raise NonHyperbolicError("degenerate endpoint rate")
    return 18.0 / slowest, 400.0 / slowest


def ns_profile(setup: ShockSetup, mu_tilde, L=None, n_samples=1201,
               resid_tol=1e-6) -> ProfileSolution:
    """Viscous shock profile by integrating mu_tilde U' = g(U) from the midpoint.

    Both directions from U(0) = (U- + U+)/2; the half-length doubles until
    the endpoint residual is below resid_tol (capped); Sigma = -mu_tilde U'
    is recovered as -g(U).  U must come out strictly monotone.
    """
    if mu_tilde <= 0.0:
        raise DomainError("mu_tilde must be positive")
    mid = 0.5 * (setup.u_minus + setup.u_plus)
    L0, L_cap = _sample_window(setup, mu_tilde, 0.0)
    L = float(L) if L is not None else L0

    def rhs(_, y):
        return [setup.g(y[0]) / mu_tilde]

    while True:
        fwd = solve_ivp(rhs, (0.0, L), [mid], **_IVP_OPTS)
        bwd = solve_ivp(rhs, (0.0, -L), [mid], **_IVP_OPTS)
        if not (fwd.success and bwd.success):
            raise ProfileError("profile integration failed")
        res = max(abs(bwd.y[0, -1] - setup.u_minus), abs(fwd.y[0, -1] - setup.u_plus))
        if res < resid_tol or setup.amplitude() < resid_tol:
            break
        if 2.0 * L > L_cap:
            raise ProfileError(
                f"endpoint residual {res:.2e} not reached within L cap {L_cap:.3g}; increase L")
        L *= 2.0

    xi = np.linspace(-L, L, n_samples)
    U = np.empty_like(xi)
    neg, pos = xi < 0.0, xi >= 0.0
    U[neg] = bwd.sol(xi[neg])[0]
    U[pos] = fwd.sol(xi[pos])[0]
    mono_tol = 1e-9 * setup.amplitude()  # dense-output noise in the flat tails
    if setup.amplitude() > 10.0 * resid_tol and not np.all(np.diff(U) < mono_tol):
        raise ProfileError("viscous profile is not monotone; bad setup")
    Sigma = -np.asarray(setup.g(U))
    R = setup.m / U
    resid = (float(abs(U[0] - setup.u_minus)), float(abs(U[-1] - setup.u_plus)))
    return ProfileSolution(setup, float(mu_tilde), 0.0, xi, R, U, Sigma, resid)


# ---------------------------------------------------------------------------
# relaxation profile by shooting
# ---------------------------------------------------------------------------

def _relax_rhs(setup, mu_tilde, eps):
    def rhs(_, y):
        u, s = y
        d = 1.0 - eps * setup.m * setup.dg(u)
        return [-s / (mu_tilde * d), setup.dg(u) * s / (mu_tilde * d)]
    return rhs


def _check_eps_window(setup, eps, n=512):
    """The solved-for-derivatives form degenerates where 1 - eps m g'(U) = 0."""
    u = np.linspace(setup.u_plus, setup.u_minus, n)
    dmin = float(np.min(1.0 - eps * setup.m * setup.dg(u)))
    if dmin < 1e-3:
        raise ProfileConnectionError(
            f"relaxation scale too large: min(1 - eps m g') = {dmin:.3e} <= 0 "
            "on the profile window; the connection ceases")


def relaxation_profile(setup: ShockSetup, mu_tilde, eps, L=None, n_samples=1201,
                       resid_tol=1e-6, offset=1e-6) -> ProfileSolution:
    """Relaxation shock profile for eps > 0 by shooting from the unstable manifold.

    Integrates the planar (U, Sigma) system from the upstream rest point
    offset along its unstable eigenvector, Newton-adjusting the scalar
    offset until the phase condition U(0) = (U- + U+)/2 holds, then
    resamples symmetrically with the endpoint-residual control of the
    viscous routine.  The momentum first integral is conserved along the
    shot and reported as the miss distance on failure.
    """
    if eps <= 0.0:
        raise DomainError("eps must be positive (eps = 0 is the viscous profile)")
    if mu_tilde <= 0.0:
        raise DomainError("mu_tilde must be positive")
    _check_eps_window(setup, eps)
    rest = hyperbolic_restpoint_check(setup, mu_tilde, eps)
    lam_u = rest.upstream_rate
    amp = setup.amplitude()
    mid = 0.5 * (setup.u_minus + setup.u_plus)
    rhs = _relax_rhs(setup, mu_tilde, eps)
    # unstable eigenvector of the upstream linearization: (1, -g'(u-))
    gp_minus = float(setup.dg(setup.u_minus))
    L_shoot = max(np.log(max(amp, 1e-8) / offset) / lam_u, 4.0 / lam_u)

    def shoot(log_s):
        s = np.exp(log_s)
        y0 = [setup.u_minus - s, gp_minus * s]
        sol = solve_ivp(rhs, (-L_shoot, 0.0), y0, **_IVP_OPTS)
        if not sol.success:
            raise ProfileConnectionError("shooting integration failed")
        return sol

    def phase_miss(log_s):
        return float(shoot(log_s).y[0, -1] - mid)

    # bracket in log-offset, then secant toward the phase condition
    lo, hi = np.log(offset) - 18.0, np.log(min(0.45 * amp, setup.u_minus * 0.5))
    f_lo, f_hi = phase_miss(lo), phase_miss(hi)
    if not (f_lo > 0.0 > f_hi):
        raise ProfileConnectionError(
            "phase condition not bracketed by the offset window",
            miss_distance=min(abs(f_lo), abs(f_hi)))
    a, b, fa, fb = lo, hi, f_lo, f_hi
    log_s = 0.5 * (a + b)
    for _ in range(80):
        log_s = b - fb * (b - a) / (fb - fa) if fb != fa else 0.5 * (a + b)
        if not (a < log_s < b):
            log_s = 0.5 * (a + b)
        fm = phase_miss(log_s)
        if abs(fm) < 1e-12 * max(1.0, amp):
            break
        if fm > 0.0:
            a, fa = log_s, fm
        else:
            b, fb = log_s, fm
    else:
        raise ProfileConnectionError("phase Newton did not converge",
                                     miss_distance=abs(fm))

    sol0 = shoot(log_s)
    u0, s0 = sol0.y[:, -1]
    # re-integrate symmetrically from the phase point
    L0, L_cap = _sample_window(setup, mu_tilde, eps)
    L = float(L) if L is not None else L0
    while True:
        fwd = solve_ivp(rhs, (0.0, L), [u0, s0], **_IVP_OPTS)
        bwd = solve_ivp(rhs, (0.0, -L), [u0, s0], **_IVP_OPTS)
        if not (fwd.success and bwd.success):
            raise ProfileConnectionError("profile integration failed")
        res = max(abs(bwd.y[0, -1] - setup.u_minus), abs(fwd.y[0, -1] - setup.u_plus),
                  abs(bwd.y[1, -1]), abs(fwd.y[1, -1]))
        if res < resid_tol:
            break
        if 2.0 * L > L_cap:
            raise ProfileConnectionError(
                f"endpoint residual {res:.2e} not reached within L cap", miss_distance=res)
        L *= 2.0

    xi = np.linspace(-L, L, n_samples)
    U = np.empty_like(xi)
    S = np.empty_like(xi)
    neg, pos = xi < 0.0, xi >= 0.0
    U[neg], S[neg] = bwd.sol(xi[neg])
    U[pos], S[pos] = fwd.sol(xi[pos])
    if not np.all(np.diff(U) < 1e-9 * setup.amplitude()):
        raise ProfileError("relaxation profile is not monotone")
    R = setup.m / U
    resid = (float(abs(U[0] - setup.u_minus)), float(abs(U[-1] - setup.u_plus)))
    prof = ProfileSolution(setup, float(mu_tilde), float(eps), xi, R, U, S, resid)
    drift = prof.momentum_integral_drift()
    if drift > 1e-8 * max(1.0, abs(setup.momentum_const)):
        raise ProfileConnectionError("momentum integral drifted along the shot",
                                     miss_distance=drift)
    return prof


def constant_profile(setup: ShockSetup, mu_tilde, eps=0.0, L=10.0, n_samples=201):
    """Zero-amplitude (constant-state) profile, useful as a degenerate fixture."""
    xi = np.linspace(-L, L, n_samples)
    u = 0.5 * (setup.u_minus + setup.u_plus)
    U = np.full_like(xi, u)
    return ProfileSolution(setup, float(mu_tilde), float(eps), xi, setup.m / U, U,
                           -np.asarray(setup.g(U)), (0.0, 0.0))


# ---------------------------------------------------------------------------
# rest-point diagnostics and the eps -> 0 profile limit
# ---------------------------------------------------------------------------

@dataclass
class RestPointReport:
    """Linearization data at both rest points of the profile dynamics.

    For eps > 0 the planar system carries a structural zero eigenvalue
    (the momentum integral foliates the plane into invariant leaves, each
    with its own rest points); hyperbolicity is judged by the rate of the
    leaf-restricted dynamics.
    """

    upstream_rate: float
    downstream_rate: float
    upstream_eigs: np.ndarray
    downstream_eigs: np.ndarray
    upstream_unstable_count: int
    downstream_stable_count: int

    @property
    def hyperbolic(self) -> bool:
        return min(abs(self.upstream_rate), abs(self.downstream_rate)) > 1e-10


def hyperbolic_restpoint_check(setup: ShockSetup, mu_tilde, eps) -> RestPointReport:
    """Eigen-data of the linearized profile dynamics at (U+-, Sigma = 0).

    eps = 0: rates g'(u)/mu_tilde of the scalar viscous ODE.  eps > 0:
    eigenvalues {0, g'(u)/(mu_tilde D(u))} of the planar system.  Raises
    NonHyperbolicError when a leaf rate vanishes (sonic end state).
    """
    if eps < 0.0:
        raise DomainError("eps must be nonnegative")
    reports = {}
    for tag, u in (("minus", setup.u_minus), ("plus", setup.u_plus)):
        gp = float(setup.dg(u))
        if eps == 0.0:
            rate = gp / mu_tilde
            eigs = np.array([rate])
        else:
            d = 1.0 - eps * setup.m * gp
            if abs(d) < 1e-12:
                raise NonHyperbolicError("solved-for-derivatives form degenerates at a rest point")
            rate = gp / (mu_tilde * d)
            eigs = np.array([0.0, rate])
        if abs(rate) <= 1e-10:
            raise NonHyperbolicError(f"rest point u_{tag} is not hyperbolic on its leaf")
        reports[tag] = (rate, eigs)
    up_rate, up_eigs = reports["minus"]
    dn_rate, dn_eigs = reports["plus"]
    return RestPointReport(
        up_rate, dn_rate, up_eigs, dn_eigs,
        int(np.sum(up_eigs > 1e-10)), int(np.sum(dn_eigs < -1e-10)))


@dataclass
class ProfileLimitRow:
    eps: float
    sup_slaving_residual: float
    sup_state_diff: float


def profile_limit_study(setup: ShockSetup, mu_tilde, eps_list, resid_tol=1e-8,
                        n_samples=2001):
    """eps -> 0 diagnostics: sup |Sigma_eps + mu_tilde U_eps'| and sup state distance.

    The slaving residual measures how far the relaxation stress sits from
    the viscous constitutive value along its own profile; the state
    distance compares (R, U) against the viscous profile on a common grid.
    Both columns decay at first order in eps.
    """
    ns = ns_profile(setup, mu_tilde, resid_tol=resid_tol, n_samples=n_samples)
    rows = []
    for eps in sorted(eps_list, reverse=True):
        prof = relaxation_profile(setup, mu_tilde, eps, resid_tol=resid_tol,
                                  n_samples=n_samples)
        _, du, _ = prof.derivatives(prof.xi)
        slaving = float(np.max(np.abs(prof.Sigma + mu_tilde * du)))
        xi = ns.xi[np.abs(ns.xi) <= min(ns.L, prof.L)]
        r0, u0, _ = ns.evaluate(xi)
        r1, u1, _ = prof.evaluate(xi)
        state = float(max(np.max(np.abs(r1 - r0)), np.max(np.abs(u1 - u0))))
        rows.append(ProfileLimitRow(float(eps), slaving, state))
    return rows
