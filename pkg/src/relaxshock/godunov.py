"""Godunov variables, generating potentials, and their verification.

A chart is a list of variables Y together with a 4-potential X^alpha(Y)
whose Y-gradients generate all spatiotemporal fluxes, F^{alpha b} =
dX^alpha/dY_b.  When the rank-2 flux block is symmetric the chart also
carries a scalar protopotential X with X^alpha = dX/dY_alpha over the
four designated slots.  Definiteness of the Hessian of X^0 is the
symmetric-hyperbolicity test; for Lorentz-invariant charts, definiteness
of T_alpha Hess(X^alpha) over timelike T is the causality test.

Charts built here:

* Galilean Euler (5 variables), Navier-Stokes-Fourier (14 variables, with
  a 5-component deviatoric stress so tau carries the trace), and the
  extended `ruggeri` chart whose pressure argument is shifted by the
  dissipative quadratic S.
* Lorentz-invariant Euler, the Eckart-type linear-in-Sigma extension, and
  its `ruggeri`-shifted variant.

All derivative generation is numerical (central differences, Richardson
refined where noise matters); chart evaluators are pure functions of Y.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .lorentz import METRIC, ProjectorSet, lower, projectors
from .model import definiteness_from_pivots, _ldl_pivots

_DEV_SLOTS = ((0, 0), (1, 1), (0, 1), (0, 2), (1, 2))
# canonical order of the 10 independent symmetric rank-2 components
_SYM10 = ((0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3))


def deviatoric_from_slots(comps):
    """3x3 trace-free symmetric tensor from its 5 independent components."""
    s11, s22, s12, s13, s23 = comps
    return np.array([[s11, s12, s13], [s12, s22, s23], [s13, s23, -s11 - s22]])


def slots_from_deviatoric(sig):
    return np.array([sig[0, 0], sig[1, 1], sig[0, 1], sig[0, 2], sig[1, 2]])


def sym10_to_matrix(comps):
    S = np.zeros((4, 4))
    for c, (a, b) in zip(comps, _SYM10):
        S[a, b] = c
        S[b, a] = c
    return S


def matrix_to_sym10(S):
    return np.array([S[a, b] for a, b in _SYM10])


# ---------------------------------------------------------------------------
# chart containers and generic checks
# ---------------------------------------------------------------------------

@dataclass
class GodunovChart:
    """Variables + potential evaluators of one symmetric system.

    ``potential(Y)`` returns the 4 components X^alpha (slot 0 temporal);
    ``potential_slots`` names the Y-indices paired with them in the
    protopotential identity X^alpha = dX/dY_slot.
    """

    name: str
    var_names: tuple
    potential: object
    protopotential: object = None
    production: object = None
    lorentz: bool = False
    potential_slots: tuple = (0, 1, 2, 3)
    to_physical: object = None

    @property
    def nvars(self):
        return len(self.var_names)


def _central_gradient(f, y, h, richardson=True):
    y = np.asarray(y, dtype=float)
    n = y.size

    def grad(step):
        g = np.empty(n)
        for i in range(n):
            hi = step * (1.0 + abs(y[i]))
            yp, ym = y.copy(), y.copy()
            yp[i] += hi
            ym[i] -= hi
            g[i] = (f(yp) - f(ym)) / (2.0 * hi)
        return g

    if not richardson:
        return grad(h)
    return (4.0 * grad(0.5 * h) - grad(h)) / 3.0


def _scalar_hessian(f, y, h):
    """Plain central-difference Hessian of a scalar function (unbatched f)."""
    y = np.asarray(y, dtype=float)
    n = y.size
    hs = h * (1.0 + np.abs(y))
    H = np.empty((n, n))
    f0 = f(y)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = hs[i]
        H[i, i] = (f(y + ei) - 2.0 * f0 + f(y - ei)) / hs[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = hs[j]
            H[i, j] = H[j, i] = (f(y + ei + ej) - f(y + ei - ej)
                                 - f(y - ei + ej) + f(y - ei - ej)) / (4.0 * hs[i] * hs[j])
    return H


def fluxes_from_potential(chart: GodunovChart, Y, step=1e-6):
    """F^{alpha b} = dX^alpha/dY_b by central differences (4 x nvars)."""
    Y = np.asarray(Y, dtype=float)
    n = Y.size
    F = np.empty((4, n))
    for b in range(n):
        h = step * (1.0 + abs(Y[b]))
        Yp, Ym = Y.copy(), Y.copy()
        Yp[b] += h
        Ym[b] -= h
        F[:, b] = (np.asarray(chart.potential(Yp)) - np.asarray(chart.potential(Ym))) / (2.0 * h)
    return F


def flux_jacobian_symmetry_defect(chart: GodunovChart, Y, step=1e-4):
    """max over alpha of the asymmetry of Hess_Y(X^alpha); small by construction."""
    defect = 0.0
    for alpha in range(4):
        H = _scalar_hessian(lambda y, a=alpha: float(chart.potential(y)[a]), Y, step)
        scale = max(1.0, float(np.max(np.abs(H))))
        defect = max(defect, float(np.max(np.abs(H - H.T))) / scale)
    return defect


def protopotential_consistency(chart: GodunovChart, Y, step=1e-5):
    """max relative defect of X^alpha = dX/dY_slot over the four slots."""
    if chart.protopotential is None:
        raise DomainError(f"chart {chart.name} carries no protopotential")
    Y = np.asarray(Y, dtype=float)
    X = np.asarray(chart.potential(Y), dtype=float)
    worst = 0.0
    for alpha, b in enumerate(chart.potential_slots):
        h = step * (1.0 + abs(Y[b]))
        Yp, Ym = Y.copy(), Y.copy()
        Yp[b] += h
        Ym[b] -= h
        d = (chart.protopotential(Yp) - chart.protopotential(Ym)) / (2.0 * h)
        worst = max(worst, abs(d - X[alpha]) / max(1.0, abs(X[alpha])))
    return worst


@dataclass
class DefinitenessReport:
    definite: bool | None
    positive: bool
    negative: bool
    signature: tuple
    min_abs_pivot: float
    hessian: np.ndarray = field(repr=False, default=None)


def _definiteness(H, tol):
    pivots = _ldl_pivots(0.5 * (H + H.T))
    scale = max(1.0, float(np.max(np.abs(H))))
    n_zero = int(np.sum(np.abs(pivots) <= tol * scale))
    n_pos = int(np.sum(pivots > tol * scale))
    n_neg = int(np.sum(pivots < -tol * scale))
    pos, neg, min_piv = definiteness_from_pivots(pivots, tol * scale)
    definite = None if n_zero > 0 else (pos or neg)
    return DefinitenessReport(definite, pos, neg, (n_pos, n_neg, n_zero), min_piv, H)


def hyperbolicity_check(chart: GodunovChart, Y, step=1e-4, tol=1e-8) -> DefinitenessReport:
    """Definiteness of Hess_Y(X^0): the symmetric-hyperbolicity verdict.

    A numerically singular Hessian yields an explicit indeterminate
    verdict (``definite is None``) rather than a guess.
    """
    H = _scalar_hessian(lambda y: float(chart.potential(y)[0]), np.asarray(Y, float), step)
    return _definiteness(H, tol)


def causality_check(chart: GodunovChart, Y, T, step=1e-4, tol=1e-8) -> DefinitenessReport:
    """Definiteness of Hess_Y(T_alpha X^alpha) for a timelike direction T.

    Lorentz-invariant charts only; T is contravariant and must satisfy
    T.T < 0.
    """
    if not chart.lorentz:
        raise DomainError("causality applies to Lorentz-invariant charts")
    T = np.asarray(T, dtype=float)
    if float(T @ METRIC @ T) >= 0.0:
        raise DomainError("probe direction must be timelike")
    T_lo = lower(T)

    def scal(y):
        return float(T_lo @ np.asarray(chart.potential(y)))

    H = _scalar_hessian(scal, np.asarray(Y, float), step)
    return _definiteness(H, tol)


def causality_scan(chart: GodunovChart, Y, T_list, step=1e-4, tol=1e-8):
    """Causality verdicts over a set of timelike directions."""
    return [causality_check(chart, Y, T, step=step, tol=tol) for T in T_list]


# ---------------------------------------------------------------------------
# Galilean charts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DissipationCoefficients:
    """Quadratic-shift weights of the extended chart and production rates.

    The face-value sign convention makes Hess(X^0) at equilibrium carry
    the *opposite* sign on the dissipative block; negative eps values
    restore definiteness and are the defaults (see the hyperbolicity
    tests for the sign study).
    """

    eps_S: float = -0.05
    eps_B: float = -0.05
    eps_Q: float = -0.05
    eta_S: float = 1.0
    eta_B: float = 1.0
    eta_Q: float = 1.0


def _galilean_physical(Y, extended):
    psi_t, ut, tht = Y[0], np.asarray(Y[1:4]), Y[4]
    if tht <= 0.0:
        raise DomainError("inverse temperature slot must be positive")
    theta = 1.0 / tht
    u = theta * ut
    psi = psi_t + float(ut @ ut) / (2.0 * tht)
    out = {"theta": theta, "psi": psi, "u": u, "ut": ut, "tht": tht}
    if extended:
        st = deviatoric_from_slots(Y[5:10])
        taut, qt = Y[10], np.asarray(Y[11:14])
        out.update({"sigma_t": st, "tau_t": taut, "q_t": qt,
                    "sigma": theta * st, "tau": theta * taut, "q": theta ** 2 * qt})
    return out


def _galilean_quadratic(ph):
    """theta * (-(1/2)(sigma~ + tau~ I):u~u~ + q~.u~), the dissipative hook."""
    st, taut, qt, ut = ph["sigma_t"], ph["tau_t"], ph["q_t"], ph["ut"]
    theta = ph["theta"]
    return theta * (-0.5 * float(ut @ (st + taut * np.eye(3)) @ ut) + float(qt @ ut))


def _galilean_shift(ph, co: DissipationCoefficients):
    st, taut, qt = ph["sigma_t"], ph["tau_t"], ph["q_t"]
    return 0.5 * (co.eps_S * float(np.tensordot(st, st)) + co.eps_B * taut ** 2
                  + co.eps_Q * float(qt @ qt))


def build_charts(geos, coeffs: DissipationCoefficients = None):
    """The Galilean {euler, nsf, ruggeri} charts on one Godunov-form EOS.

    Variables: (psi~, u~, theta~) plus, extended, the 5 deviatoric stress
    slots, tau~, and q~ (14 in total).  The protopotentials carry the
    1/theta weight on the pressure antiderivative that the generating
    identities require.  Euler production is identically zero.
    """
    co = coeffs or DissipationCoefficients()
    core = ("psi_t", "ut1", "ut2", "ut3", "tht")
    ext = core + ("st11", "st22", "st12", "st13", "st23", "taut", "qt1", "qt2", "qt3")

    def euler_potential(Y):
        ph = _galilean_physical(Y, False)
        p = float(geos.p(ph["theta"], ph["psi"]))
        x0 = p / ph["theta"]
        return np.concatenate([[x0], x0 * ph["u"]])

    def euler_proto(Y):
        ph = _galilean_physical(Y, False)
        return float(ph["tht"] * geos.x_psi(ph["theta"], ph["psi"]))

    def dissipative_flux(ph, p):
        theta = ph["theta"]
        stress = p * np.eye(3) - ph["sigma"] - ph["tau"] * np.eye(3)
        return (stress @ ph["u"] + ph["q"]) / theta

    def nsf_potential(Y):
        ph = _galilean_physical(Y, True)
        p = float(geos.p(ph["theta"], ph["psi"]))
        return np.concatenate([[p / ph["theta"]], dissipative_flux(ph, p)])

    def nsf_proto(Y):
        ph = _galilean_physical(Y, True)
        return float(ph["tht"] * geos.x_psi(ph["theta"], ph["psi"]) + _galilean_quadratic(ph))

    def ruggeri_potential(Y):
        ph = _galilean_physical(Y, True)
        p_n = float(geos.p(ph["theta"], ph["psi"] - _galilean_shift(ph, co)))
        return np.concatenate([[p_n / ph["theta"]], dissipative_flux(ph, p_n)])

    def ruggeri_proto(Y):
        ph = _galilean_physical(Y, True)
        return float(ph["tht"] * geos.x_psi(ph["theta"], ph["psi"] - _galilean_shift(ph, co))
                     + _galilean_quadratic(ph))

    def extended_production(Y):
        ph = _galilean_physical(Y, True)
        theta = ph["theta"]
        out = np.zeros(14)
        out[5:10] = slots_from_deviatoric(ph["sigma"]) / (theta * co.eta_S)
        out[10] = ph["tau"] / (theta * co.eta_B)
        out[11:14] = -ph["q"] / (theta * co.eta_Q)
        return out

    euler = GodunovChart("euler", core, euler_potential, euler_proto,
                         production=lambda Y: np.zeros(5),
                         to_physical=lambda Y: _galilean_physical(Y, False))
    nsf = GodunovChart("nsf", ext, nsf_potential, nsf_proto,
                       production=extended_production,
                       to_physical=lambda Y: _galilean_physical(Y, True))
    ruggeri = GodunovChart("ruggeri", ext, ruggeri_potential, ruggeri_proto,
                           production=extended_production,
                           to_physical=lambda Y: _galilean_physical(Y, True))
    return {"euler": euler, "nsf": nsf, "ruggeri": ruggeri}


def equilibrium_state(chart: GodunovChart, psi_t=0.0, ut=(0.0, 0.0, 0.0), tht=1.0):
    """A chart state with all dissipative slots at zero."""
    Y = np.zeros(chart.nvars)
    Y[0] = psi_t
    Y[1:4] = ut
    Y[4] = tht
    return Y


# ---------------------------------------------------------------------------
# Lorentz-invariant charts
# ---------------------------------------------------------------------------

def _theta_from_upsilon_lo(ups_lo):
    ups_up = METRIC @ ups_lo
    sq = float(ups_lo @ ups_up)
    if sq >= 0.0:
        raise DomainError("Upsilon must be timelike")
    return (-sq) ** -0.5


def rel_euler_chart(geos) -> GodunovChart:
    """Relativistic Euler chart: Y = (Ups_0..Ups_3 covariant, psi)."""

    def potential(Y):
        ups_lo = np.asarray(Y[:4], dtype=float)
        psi = Y[4]
        theta = _theta_from_upsilon_lo(ups_lo)
        return float(geos.p(theta, psi)) * (METRIC @ ups_lo)

    def proto(Y):
        ups_lo = np.asarray(Y[:4], dtype=float)
        return float(geos.x_rel(_theta_from_upsilon_lo(ups_lo), Y[4]))

    return GodunovChart("rel_euler", ("U0", "U1", "U2", "U3", "psi"),
                        potential, proto, production=lambda Y: np.zeros(5),
                        lorentz=True)


def _rel_extended_unpack(Y):
    ups_lo = np.asarray(Y[:4], dtype=float)
    psi = float(Y[4])
    sig_lo = sym10_to_matrix(np.asarray(Y[5:15], dtype=float))
    return ups_lo, psi, sig_lo


def _sigma_quad(sig_lo, ups_lo):
    ups_up = METRIC @ ups_lo
    return float(ups_up @ sig_lo @ ups_up)


def rel_eckart_chart(geos, etas=(1.0, 1.0, 1.0, 0.0)) -> GodunovChart:
    """Linear-in-Sigma extension: X = x_rel(theta, psi) - Sigma:Ups Ups / 2.

    etas = (eta_S, eta_B, eta_Q, eta_H); eta_H defaults to zero but the
    code path stays live for nonzero values.
    """

    def proto(Y):
        ups_lo, psi, sig_lo = _rel_extended_unpack(Y)
        theta = _theta_from_upsilon_lo(ups_lo)
        return float(geos.x_rel(theta, psi)) - 0.5 * _sigma_quad(sig_lo, ups_lo)

    def potential(Y):
        ups_lo, psi, sig_lo = _rel_extended_unpack(Y)
        theta = _theta_from_upsilon_lo(ups_lo)
        sig_up = METRIC @ sig_lo @ METRIC
        return float(geos.p(theta, psi)) * (METRIC @ ups_lo) - sig_up @ ups_lo

    def production(Y):
        ups_lo, _, sig_lo = _rel_extended_unpack(Y)
        theta = _theta_from_upsilon_lo(ups_lo)
        I = eckart_production(sig_lo, theta * (METRIC @ ups_lo), theta, etas)
        return np.concatenate([np.zeros(5), matrix_to_sym10(I)])

    names = ("U0", "U1", "U2", "U3", "psi") + tuple(f"S{a}{b}" for a, b in _SYM10)
    return GodunovChart("rel_eckart", names, potential, proto, production=production,
                        lorentz=True)


def eckart_production(sig_lo, u, theta, etas):
    """I_{alpha beta} = -(1/theta)(S/eta_S - B/eta_B - Q/eta_Q - H/eta_H)(Sigma).

    Face-value sign pattern; a vanishing coefficient simply switches its
    projector channel off (the corresponding Sigma component must then
    vanish for consistency, which callers check separately).
    """
    ps = projectors(u)
    eta_S, eta_B, eta_Q, eta_H = etas
    out = np.zeros((4, 4))
    for eta, key, sign in ((eta_S, "S", +1.0), (eta_B, "B", -1.0),
                           (eta_Q, "Q", -1.0), (eta_H, "H", -1.0)):
        if eta != 0.0:
            out += sign / eta * ps.apply(key, sig_lo)
    return -out / theta


def sigma_shift(sig_lo, ups_lo, eps_coeffs):
    """S-bar = (1/2) sum_C eps_C <P_C Sigma, Sigma> (full metric contraction)."""
    theta = _theta_from_upsilon_lo(ups_lo)
    ps = projectors(theta * (METRIC @ ups_lo))
    sig_up = METRIC @ sig_lo @ METRIC
    total = 0.0
    for eps, key in zip(eps_coeffs, ("S", "B", "Q", "H")):
        total += eps * float(np.tensordot(ps.apply(key, sig_lo), sig_up))
    return 0.5 * total


def rel_ruggeri_chart(geos, eps_coeffs=(-0.05, -0.05, -0.05, 0.0)) -> GodunovChart:
    """Shifted protopotential: X = x_rel(theta, psi - S-bar) - Sigma:Ups Ups / 2."""

    def proto(Y):
        ups_lo, psi, sig_lo = _rel_extended_unpack(Y)
        theta = _theta_from_upsilon_lo(ups_lo)
        return (float(geos.x_rel(theta, psi - sigma_shift(sig_lo, ups_lo, eps_coeffs)))
                - 0.5 * _sigma_quad(sig_lo, ups_lo))

    def potential(Y):
        ups_lo, psi, sig_lo = _rel_extended_unpack(Y)
        theta = _theta_from_upsilon_lo(ups_lo)
        psi_eff = psi - sigma_shift(sig_lo, ups_lo, eps_coeffs)
        sig_up = METRIC @ sig_lo @ METRIC
        base = float(geos.p(theta, psi_eff)) * (METRIC @ ups_lo) - sig_up @ ups_lo
        if np.any(sig_lo != 0.0):
            # d S-bar / d Ups_alpha already carries the contravariant index
            dS = _central_gradient(
                lambda w: sigma_shift(sig_lo, w, eps_coeffs), ups_lo, 1e-4)
            base = base - float(geos.x_rel_psi(theta, psi_eff)) * dS
        return base

    names = ("U0", "U1", "U2", "U3", "psi") + tuple(f"S{a}{b}" for a, b in _SYM10)
    return GodunovChart("rel_ruggeri", names, potential, proto, lorentz=True)


# ---------------------------------------------------------------------------
# relativistic operations
# ---------------------------------------------------------------------------

def rel_euler_closed_forms(geos, ups_up, psi):
    """(T^{alpha beta}, N^alpha) of the perfect fluid in closed form."""
    ups_up = np.asarray(ups_up, dtype=float)
    theta = _theta_from_upsilon_lo(lower(ups_up))
    p_th = float(geos.p_theta(theta, psi))
    p_ps = float(geos.p_psi(theta, psi))
    p = float(geos.p(theta, psi))
    T = theta ** 3 * p_th * np.outer(ups_up, ups_up) + p * METRIC
    return T, p_ps * ups_up


@dataclass
class RelEulerReport:
    T: np.ndarray
    N: np.ndarray
    T_closed: np.ndarray
    N_closed: np.ndarray
    max_rel_err_T: float
    max_rel_err_N: float


def rel_euler_tensor(geos, ups_up, psi, step=1e-4) -> RelEulerReport:
    """Energy-momentum and particle flux from the generating potential.

    Second/mixed central differences of x_rel with respect to the
    covariant Upsilon slots and psi, cross-checked against the closed
    forms theta^3 p_theta Ups Ups + p g and p_psi Ups.
    """
    ups_up = np.asarray(ups_up, dtype=float)
    ups_lo = lower(ups_up)
    if float(ups_lo @ METRIC @ ups_lo) >= 0.0:
        raise DomainError("Upsilon must be timelike")

    def xbar(ups_lo_vec, ps):
        return float(geos.x_rel(_theta_from_upsilon_lo(ups_lo_vec), ps))

    T = _scalar_hessian(lambda w: xbar(w, psi), ups_lo, step)
    grad_p = _central_gradient(lambda w: xbar(w, psi + step), ups_lo, step)
    grad_m = _central_gradient(lambda w: xbar(w, psi - step), ups_lo, step)
    N = (grad_p - grad_m) / (2.0 * step)
    T_cl, N_cl = rel_euler_closed_forms(geos, ups_up, psi)
    scale_T = max(1.0, float(np.max(np.abs(T_cl))))
    scale_N = max(1.0, float(np.max(np.abs(N_cl))))
    return RelEulerReport(T, N, T_cl, N_cl,
                          float(np.max(np.abs(T - T_cl))) / scale_T,
                          float(np.max(np.abs(N - N_cl))) / scale_N)


@dataclass
class EckartReport:
    hessian_residual: float
    production: np.ndarray
    readback_sigma: np.ndarray
    readback_component_residual: float
    inconsistent_channels: list


def rel_eckart_assembly(geos, ups_up, psi, sigma_lo, eta_S, eta_B, eta_Q, eta_H,
                        grad_sample=None, step=1e-4) -> EckartReport:
    """Verification bundle for the linear-in-Sigma relativistic chart.

    (a) Hess_Upsilon of x_rel - Sigma:UpsUps/2 equals T_Euler - Sigma
    (finite differences); (b) the production tensor from the projector
    channels with the face-value signs; (c) constitutive readback: given a
    symmetric gradient sample G, Sigma = -theta sum_C eta_C P_C(G) has its
    projector components in the right channels.  Channels with a zero
    coefficient but a nonzero Sigma component are reported inconsistent.
    """
    ups_up = np.asarray(ups_up, dtype=float)
    sigma_lo = np.asarray(getattr(sigma_lo, "components", sigma_lo), dtype=float)
    ups_lo = lower(ups_up)
    theta = _theta_from_upsilon_lo(ups_lo)
    etas = (eta_S, eta_B, eta_Q, eta_H)
    if any(e < 0.0 for e in etas):
        raise DomainError("dissipation coefficients must be nonnegative")

    def xbar(w):
        return (float(geos.x_rel(_theta_from_upsilon_lo(w), psi))
                - 0.5 * _sigma_quad(sigma_lo, w))

    H = _scalar_hessian(xbar, ups_lo, step)
    T_cl, _ = rel_euler_closed_forms(geos, ups_up, psi)
    sig_up = METRIC @ sigma_lo @ METRIC
    target = T_cl - sig_up
    resid_a = float(np.max(np.abs(H - target))) / max(1.0, float(np.max(np.abs(target))))

    u = theta * ups_up
    ps = projectors(u)
    production = eckart_production(sigma_lo, u, theta, etas)

    inconsistent = []
    for eta, key in zip(etas, ("S", "B", "Q", "H")):
        comp = ps.apply(key, sigma_lo)
        if eta == 0.0 and float(np.max(np.abs(comp))) > 1e-10:
            inconsistent.append(key)

    if grad_sample is None:
        rng = np.random.default_rng(7)
        grad_sample = 0.1 * (lambda a: 0.5 * (a + a.T))(rng.normal(size=(4, 4)))
    G = np.asarray(grad_sample, dtype=float)
    sigma_rb = np.zeros((4, 4))
    for eta, key in zip(etas, ("S", "B", "Q", "H")):
        sigma_rb -= theta * eta * ps.apply(key, G)
    resid_c = 0.0
    for eta, key in zip(etas, ("S", "B", "Q", "H")):
        want = -theta * eta * ps.apply(key, G)
        got = ps.apply(key, sigma_rb)
        resid_c = max(resid_c, float(np.max(np.abs(got - want))))
    return EckartReport(resid_a, production, sigma_rb, resid_c, inconsistent)


@dataclass
class RuggeriReport:
    block_upsilon: np.ndarray
    block_psi: np.ndarray
    block_sigma: np.ndarray
    causality_equilibrium: DefinitenessReport
    causality_perturbed: DefinitenessReport
    shift_decomposition_residual: float


def rel_ruggeri_system(geos, ups_up, psi, sigma_lo, eps_S, eps_B, eps_Q, eps_H,
                       step=1e-4) -> RuggeriReport:
    """Generated flux blocks of the shifted chart plus causality evidence.

    Blocks are mixed second differences of the protopotential
    (Upsilon-Upsilon, Upsilon-psi, Upsilon-Sigma); causality is probed at
    the equilibrium state Sigma = 0 and at the supplied Sigma with the
    rest direction T = u.  The quadratic shift is also re-derived from
    the projector decomposition as an independent consistency number.
    """
    ups_up = np.asarray(ups_up, dtype=float)
    sigma_lo = np.asarray(getattr(sigma_lo, "components", sigma_lo), dtype=float)
    ups_lo = lower(ups_up)
    theta = _theta_from_upsilon_lo(ups_lo)
    eps_coeffs = (eps_S, eps_B, eps_Q, eps_H)
    chart = rel_ruggeri_chart(geos, eps_coeffs)

    def proto_at(w, ps_val, sig):
        Y = np.concatenate([w, [ps_val], matrix_to_sym10(sig)])
        return chart.protopotential(Y)

    B_uu = _scalar_hessian(lambda w: proto_at(w, psi, sigma_lo), ups_lo, step)
    gp = _central_gradient(lambda w: proto_at(w, psi + step, sigma_lo), ups_lo, step)
    gm = _central_gradient(lambda w: proto_at(w, psi - step, sigma_lo), ups_lo, step)
    B_up = (gp - gm) / (2.0 * step)
    B_us = np.empty((4, 10))
    for k in range(10):
        dc = np.zeros(10)
        dc[k] = step
        sp = sigma_lo + sym10_to_matrix(dc)
        sm = sigma_lo - sym10_to_matrix(dc)
        gp = _central_gradient(lambda w: proto_at(w, psi, sp), ups_lo, step)
        gm = _central_gradient(lambda w: proto_at(w, psi, sm), ups_lo, step)
        B_us[:, k] = (gp - gm) / (2.0 * step)

    Y_eq = np.concatenate([ups_lo, [psi], np.zeros(10)])
    Y_pert = np.concatenate([ups_lo, [psi], matrix_to_sym10(sigma_lo)])
    u = theta * ups_up
    ca_eq = causality_check(chart, Y_eq, u)
    ca_pert = causality_check(chart, Y_pert, u)

    ps = projectors(u)
    sig_up = METRIC @ sigma_lo @ METRIC
    recon = 0.5 * sum(eps * float(np.tensordot(ps.apply(key, sigma_lo), sig_up))
                      for eps, key in zip(eps_coeffs, ("S", "B", "Q", "H")))
    resid = abs(recon - sigma_shift(sigma_lo, ups_lo, eps_coeffs))
    return RuggeriReport(B_uu, B_up, B_us, ca_eq, ca_pert, resid)
