"""Assembly of the relaxation system for viscous compressible flow.

The balance laws evolve (rho, rho u, rho sigma, rho tau) where sigma is a
symmetric stress-like tensor and tau a scalar bulk field, both relaxing on
the fast scale eps^2 toward the equilibrium manifold sigma = tau = 0.  The
velocity-gradient couplings carry a 1/eps factor and are genuinely
non-conservative: they are kept as such (the 1D solver differences u
centrally) rather than forced into divergence form.

This module provides the c-tensor, fluxes, stiff sources, the total
energy / energy-flux pair with its dissipation identity, the convexity
Hessian of the energy in the conserved variables, the nonbarotropic
entropy production, and the 1D reduction used by the solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg

from .errors import DomainError, NonphysicalStateError


# ---------------------------------------------------------------------------
# parameters and states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Relaxation scale eps, shear mu, bulk-type nu, spatial dimension d."""

    eps: float = 0.1
    mu: float = 1.0
    nu: float = 1.0
    d: int = 3

    def __post_init__(self):
        if self.eps <= 0.0 or self.mu <= 0.0 or self.nu <= 0.0:
            raise DomainError("eps, mu, nu must all be positive")
        if self.d not in (1, 2, 3):
            raise DomainError(f"dimension must be 1, 2 or 3, got {self.d}")

    @property
    def mu_tilde(self) -> float:
        """Effective 1D viscosity (2/3) mu + nu."""
        return (2.0 / 3.0) * self.mu + self.nu


@dataclass
class PrimitiveState:
    """(rho, u, sigma, tau) with rho > 0 and sigma symmetric."""

    rho: float
    u: np.ndarray
    sigma: np.ndarray
    tau: float

    def __post_init__(self):
        self.u = np.atleast_1d(np.asarray(self.u, dtype=float))
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.rho <= 0.0:
            raise NonphysicalStateError(f"rho must be positive, got {self.rho}")
        if self.sigma.shape != (self.d, self.d):
            raise DomainError(f"sigma must be {self.d}x{self.d}")
        if not np.allclose(self.sigma, self.sigma.T, atol=1e-13):
            raise DomainError("sigma must be symmetric")

    @property
    def d(self) -> int:
        return self.u.shape[0]


@dataclass
class ConservedVec:
    """(rho, m = rho u, S = rho sigma, T = rho tau)."""

    rho: float
    m: np.ndarray
    S: np.ndarray
    T: float

    def __post_init__(self):
        self.m = np.atleast_1d(np.asarray(self.m, dtype=float))
        self.S = np.asarray(self.S, dtype=float)
        if self.rho <= 0.0:
            raise NonphysicalStateError(f"rho must be positive, got {self.rho}")

    @property
    def d(self) -> int:
        return self.m.shape[0]

    @classmethod
    def from_primitive(cls, w: PrimitiveState) -> "ConservedVec":
        return cls(w.rho, w.rho * w.u, w.rho * w.sigma, w.rho * w.tau)

    def to_primitive(self) -> PrimitiveState:
        return PrimitiveState(self.rho, self.m / self.rho, self.S / self.rho, self.T / self.rho)

    def flatten(self) -> np.ndarray:
        """Pack as [rho, m (d), S (d*d row-major), T]."""
        return np.concatenate([[self.rho], self.m, self.S.ravel(), [self.T]])

    @classmethod
    def from_flat(cls, z, d) -> "ConservedVec":
        z = np.asarray(z, dtype=float)
        return cls(z[0], z[1:1 + d], z[1 + d:1 + d + d * d].reshape(d, d), z[-1])


@dataclass
class EnergyPair:
    E: float
    F: np.ndarray


@dataclass
class EntropyPair:
    """Nonbarotropic entropy eta = rho s and flux zeta = eta u."""

    eta: float
    zeta: np.ndarray


@dataclass
class FluxVec:
    """Conservative flux of every field in one coordinate direction.

    The 1/eps velocity-gradient couplings of the sigma- and tau-balances are
    *not* part of this flux; they are non-conservative products.
    """

    rho: float
    m: np.ndarray
    S: np.ndarray
    T: float


@dataclass
class SourceVec:
    rho: float
    m: np.ndarray
    S: np.ndarray
    T: float


# ---------------------------------------------------------------------------
# c-tensor
# ---------------------------------------------------------------------------

def c_tensor(d: int, exact: bool = False) -> np.ndarray:
    """Coupling tensor c[k,l,j,i] = (delta_ki delta_lj + delta_li delta_kj)/2 - delta_ji delta_kl / 3.

    The 1/3 is kept for every d.  With ``exact=True`` the entries are
    ``fractions.Fraction`` (object dtype) so contraction identities can be
    asserted in exact rational arithmetic.
    """
    if d not in (1, 2, 3):
        raise DomainError(f"dimension must be 1, 2 or 3, got {d}")
    if exact:
        c = np.empty((d, d, d, d), dtype=object)
        half, third = Fraction(1, 2), Fraction(1, 3)
        for k in range(d):
            for l in range(d):
                for j in range(d):
                    for i in range(d):
                        val = half * (int(k == i) * int(l == j) + int(l == i) * int(k == j))
                        val -= third * int(j == i) * int(k == l)
                        c[k, l, j, i] = val
        return c
    eye = np.eye(d)
    c = 0.5 * (np.einsum("ki,lj->klji", eye, eye) + np.einsum("li,kj->klji", eye, eye))
    c -= (1.0 / 3.0) * np.einsum("ji,kl->klji", eye, eye)
    return c


def c_contract(sigma, c) -> np.ndarray:
    """sigma_kl c^{klj}_i as a (j, i)-indexed matrix."""
    return np.einsum("kl,klji->ji", sigma, c)


# ---------------------------------------------------------------------------
# fluxes, sources, energy
# ---------------------------------------------------------------------------

def flux(U: ConservedVec, eos, params: ModelParams, direction: int) -> FluxVec:
    """Conservative flux of (rho, m, S, T) in coordinate direction j.

    Momentum picks up the full relaxation stress (sigma + tau I)/eps; the
    S- and T-balances only advect here, their gradient couplings being
    non-conservative.
    """
    if U.rho <= 0.0:
        raise NonphysicalStateError("rho must be positive")
    w = U.to_primitive()
    j = direction
    p = float(eos.p(1.0 / w.rho))
    uj = w.u[j]
    ej = np.zeros(U.d)
    ej[j] = 1.0
    f_m = w.rho * uj * w.u + p * ej + (w.sigma[:, j] + w.tau * ej) / params.eps
    return FluxVec(w.rho * uj, f_m, w.rho * uj * w.sigma, w.rho * uj * w.tau)


def source(U: ConservedVec, params: ModelParams) -> SourceVec:
    """Stiff relaxation source: zero in rho and m, -sigma/(mu eps^2), -tau/(nu eps^2)."""
    w = U.to_primitive()
    e2 = params.eps ** 2
    return SourceVec(0.0, np.zeros(U.d), -w.sigma / (params.mu * e2), -w.tau / (params.nu * e2))


def energy_pair(state: PrimitiveState, eos, params: ModelParams) -> EnergyPair:
    """Total energy density and flux.

    E = rho (e + |u|^2/2 + sigma:sigma/2 + tau^2/2),
    F^j = ((E + p) delta_ij + (sigma_ij + tau delta_ij)/eps) u_i.
    """
    if state.rho <= 0.0:
        raise NonphysicalStateError("rho must be positive")
    e = float(eos.e(1.0 / state.rho))
    p = float(eos.p(1.0 / state.rho))
    E = state.rho * (e + 0.5 * state.u @ state.u
                     + 0.5 * np.tensordot(state.sigma, state.sigma) + 0.5 * state.tau ** 2)
    F = (E + p) * state.u + (state.sigma @ state.u + state.tau * state.u) / params.eps
    return EnergyPair(float(E), F)


def dissipation_rate(state: PrimitiveState, params: ModelParams) -> float:
    """-sigma:sigma/(mu eps^2) - tau^2/(nu eps^2); zero iff sigma = 0 and tau = 0."""
    e2 = params.eps ** 2
    return float(-np.tensordot(state.sigma, state.sigma) / (params.mu * e2)
                 - state.tau ** 2 / (params.nu * e2))


def entropy_production(state: PrimitiveState, varsigma: float, eos2, params: ModelParams) -> float:
    """Material rate of specific entropy, (sigma:sigma/(mu eps^2) + tau^2/(nu eps^2))/(rho theta)."""
    theta = float(eos2.theta(1.0 / state.rho, varsigma))
    if theta <= 0.0:
        raise DomainError(f"temperature must be positive, got {theta}")
    return -dissipation_rate(state, params) / (state.rho * theta)


def entropy_pair(state: PrimitiveState, varsigma: float) -> EntropyPair:
    eta = state.rho * varsigma
    return EntropyPair(float(eta), eta * state.u)


# ---------------------------------------------------------------------------
# energy Hessian in the conserved variables
# ---------------------------------------------------------------------------

def energy_of_conserved(z, d, eos):
    """E(rho, m, S, T) = rho e(1/rho) + (|m|^2 + |S|^2 + T^2)/(2 rho).

    ``z`` may be a single flattened vector or a (..., n) batch.
    """
    z = np.asarray(z, dtype=float)
    rho = z[..., 0]
    quad = np.sum(z[..., 1:] ** 2, axis=-1)
    return rho * eos.e(1.0 / rho) + 0.5 * quad / rho


@dataclass
class HessianReport:
    matrix: np.ndarray
    positive_definite: bool
    min_pivot: float
    pivots: np.ndarray = field(repr=False, default=None)


def _ldl_pivots(Hmat):
    """Pivot values of a symmetric (Bunch-Kaufman) factorization.

    2x2 blocks are reduced to their eigenvalues so that the returned array
    is comparable against a scalar tolerance.
    """
    lu, dmat, _ = scipy.linalg.ldl(Hmat)
    piv = []
    n = dmat.shape[0]
    i = 0
    while i < n:
        if i + 1 < n and abs(dmat[i, i + 1]) > 0.0:
            piv.extend(np.linalg.eigvalsh(dmat[i:i + 2, i:i + 2]))
            i += 2
        else:
            piv.append(dmat[i, i])
            i += 1
    return np.asarray(piv)


def definiteness_from_pivots(pivots, tol):
    """(is_positive_definite, is_negative_definite, min_abs_pivot)."""
    pivots = np.asarray(pivots)
    return bool(np.all(pivots > tol)), bool(np.all(pivots < -tol)), float(np.min(np.abs(pivots)))


def energy_hessian(U: ConservedVec, eos, pivot_tol=1e-10) -> HessianReport:
    """Hessian of E(rho, m, S, T), with a pivoted-factorization definiteness verdict.

    Assembled analytically; it matches the central-difference Hessian of
    ``energy_of_conserved`` to second order.  Indefiniteness is reported in
    the verdict, never raised.
    """
    if U.rho <= 0.0:
        raise NonphysicalStateError("rho must be positive")
    d = U.d
    n = 2 + d + d * d
    z = U.flatten()
    rho = U.rho
    quad = float(np.sum(z[1:] ** 2))
    H = np.zeros((n, n))
    H[0, 0] = float(eos.dp_drho(rho)) / rho + quad / rho ** 3
    H[0, 1:] = -z[1:] / rho ** 2
    H[1:, 0] = H[0, 1:]
    idx = np.arange(1, n)
    H[idx, idx] = 1.0 / rho
    scale = max(1.0, float(np.max(np.abs(np.diag(H)))))
    pos, _, min_piv = definiteness_from_pivots(_ldl_pivots(H), pivot_tol * scale)
    raw_pivots = _ldl_pivots(H)
    return HessianReport(H, pos, float(np.min(raw_pivots)), raw_pivots)


def fd_hessian(fn, z0, h=1e-5):
    """Central-difference Hessian of a scalar function of a flat vector.

    ``fn`` must accept a (..., n) batch.  Steps are scaled per-coordinate
    by (1 + |z_i|).
    """
    z0 = np.asarray(z0, dtype=float)
    n = z0.size
    hs = h * (1.0 + np.abs(z0))
    E = np.eye(n)
    # diagonal: (f(+h) - 2 f(0) + f(-h)) / h^2
    pts = np.concatenate([z0 + E * hs[:, None], z0 - E * hs[:, None], z0[None, :]])
    vals = np.asarray(fn(pts))
    fp, fm, f0 = vals[:n], vals[n:2 * n], vals[-1]
    H = np.zeros((n, n))
    H[np.arange(n), np.arange(n)] = (fp - 2.0 * f0 + fm) / hs ** 2
    # off-diagonal via the four-point cross stencil
    iu, ju = np.triu_indices(n, k=1)
    if iu.size:
        ei = E[iu] * hs[iu, None]
        ej = E[ju] * hs[ju, None]
        quad = np.concatenate([z0 + ei + ej, z0 + ei - ej, z0 - ei + ej, z0 - ei - ej])
        q = np.asarray(fn(quad)).reshape(4, -1)
        Hij = (q[0] - q[1] - q[2] + q[3]) / (4.0 * hs[iu] * hs[ju])
        H[iu, ju] = Hij
        H[ju, iu] = Hij
    return H


# ---------------------------------------------------------------------------
# energy identity for manufactured fields
# ---------------------------------------------------------------------------

def _pde_residual(fields, eos, params: ModelParams, c, t, x, h):
    """Central-difference residual of the balance laws at (t, x).

    Conserved form; the non-conservative couplings use central differences
    of u; the sources are moved to the left-hand side.
    """
    d = params.d
    eps = params.eps

    def conserved(tt, xx):
        return ConservedVec.from_primitive(fields(tt, xx))

    U0 = conserved(t, x)
    w0 = U0.to_primitive()

    Ut_p, Ut_m = conserved(t + h, x), conserved(t - h, x)
    G_rho = (Ut_p.rho - Ut_m.rho) / (2.0 * h)
    G_m = (Ut_p.m - Ut_m.m) / (2.0 * h)
    G_S = (Ut_p.S - Ut_m.S) / (2.0 * h)
    G_T = (Ut_p.T - Ut_m.T) / (2.0 * h)

    grad_u = np.zeros((d, d))  # grad_u[i, j] = du^i/dx_j
    for j in range(d):
        ej = np.zeros(d)
        ej[j] = h
        Up, Um = conserved(t, x + ej), conserved(t, x - ej)
        fp, fm = flux(Up, eos, params, j), flux(Um, eos, params, j)
        G_rho += (fp.rho - fm.rho) / (2.0 * h)
        G_m += (fp.m - fm.m) / (2.0 * h)
        G_S += (fp.S - fm.S) / (2.0 * h)
        G_T += (fp.T - fm.T) / (2.0 * h)
        grad_u[:, j] = (Up.m / Up.rho - Um.m / Um.rho) / (2.0 * h)

    # non-conservative couplings: c^{klj}_i u^i_{,j} / eps and u^j_{,j} / eps
    G_S += np.einsum("klji,ij->kl", c, grad_u) / eps
    G_T += np.trace(grad_u) / eps

    # sources on the left-hand side
    src = source(U0, params)
    G_S -= src.S
    G_T -= src.T
    return G_rho, G_m, G_S, G_T, w0


def energy_identity_residual(fields, eos, params: ModelParams, t, x, h) -> float:
    """Residual of the pointwise energy identity, O(h^2) for smooth fields.

    ``fields(t, x)`` returns a PrimitiveState.  The identity reads

        E_t + div F - dissipation = <dE/dU, balance-law residual>,

    so arbitrary smooth fields act as manufactured solutions with the
    right-hand side as compensating forcing.  For exact solutions (or any
    field with sigma trace-free wherever the multiplier weights it) the
    returned value converges to zero at second order in h.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = params.d
    if x.shape != (d,):
        raise DomainError(f"evaluation point must have dimension {d}")
    if h <= 0.0:
        raise DomainError("finite-difference step must be positive")
    c = c_tensor(d)

    def epair(tt, xx):
        return energy_pair(fields(tt, xx), eos, params)

    E_t = (epair(t + h, x).E - epair(t - h, x).E) / (2.0 * h)
    F_div = 0.0
    for j in range(d):
        ej = np.zeros(d)
        ej[j] = h
        F_div += (epair(t, x + ej).F[j] - epair(t, x - ej).F[j]) / (2.0 * h)

    G_rho, G_m, G_S, G_T, w0 = _pde_residual(fields, eos, params, c, t, x, h)
    eV = float(eos.e(1.0 / w0.rho))
    pV = float(eos.p(1.0 / w0.rho))
    w_rho = eV + pV / w0.rho - 0.5 * (w0.u @ w0.u + np.tensordot(w0.sigma, w0.sigma) + w0.tau ** 2)
    forcing = (w_rho * G_rho + w0.u @ G_m + np.tensordot(w0.sigma, G_S) + w0.tau * G_T)
    diss = dissipation_rate(w0, params)
    return float(E_t + F_div - diss - forcing)


# ---------------------------------------------------------------------------
# 1D reduction
# ---------------------------------------------------------------------------

@dataclass
class System1D:
    """The rescaled 1D system in (rho, m = rho u, w = rho sigma).

    Fluxes (m, m^2/rho + p(rho) + sigma, u w); the stiff balance is kept in
    the form eps ((rho sigma)_t + (rho u sigma)_x) + u_x = -sigma/mu_tilde,
    i.e. the solver sees a 1/eps-scaled non-conservative u_x coupling and a
    pointwise-linear source -sigma/(eps mu_tilde).
    """

    eos: object
    eps: float
    mu_tilde: float

    field_names = ("rho", "m", "w")

    def flux(self, U):
        """Conservative fluxes, U of shape (3, N)."""
        rho, m, w = U
        u = m / rho
        return np.stack([m, m * u + self.eos.p_rho(rho) + w / rho, u * w])

    def quasilinear(self, U):
        """Full quasilinear matrices A(U), shape (N, 3, 3), couplings included."""
        rho, m, w = U
        u = m / rho
        sig = w / rho
        cs2 = self.eos.dp_drho(rho)
        N = rho.shape[0]
        A = np.zeros((N, 3, 3))
        A[:, 0, 1] = 1.0
        A[:, 1, 0] = -u * u + cs2 - sig / rho
        A[:, 1, 1] = 2.0 * u
        A[:, 1, 2] = 1.0 / rho
        A[:, 2, 0] = -u * sig - u / (self.eps * rho)
        A[:, 2, 1] = sig + 1.0 / (self.eps * rho)
        A[:, 2, 2] = u
        return A

    def spectral_radius(self, U):
        """Per-cell spectral radius of the quasilinear matrix (dense eigensolve)."""
        return np.max(np.abs(np.linalg.eigvals(self.quasilinear(U))), axis=1)

    def source_halflife_factor(self, rho, dt):
        """Implicit relaxation factor: w <- w / (1 + dt / (rho eps mu_tilde))."""
        return 1.0 / (1.0 + dt / (rho * self.eps * self.mu_tilde))

    def energy_density(self, U):
        """rho e + m^2/(2 rho) + eps w^2/(2 rho), the dissipated energy of the 1D form."""
        rho, m, w = U
        return rho * self.eos.e(1.0 / rho) + 0.5 * m ** 2 / rho + 0.5 * self.eps * w ** 2 / rho

    def to_json(self) -> dict:
        return {
            "fields": list(self.field_names),
            "eps": self.eps,
            "mu_tilde": self.mu_tilde,
            "eos": {"family": type(self.eos).__name__,
                    "A": getattr(self.eos, "A", None),
                    "gamma": getattr(self.eos, "gamma", None)},
            "stiff_balance": "eps*((rho*sigma)_t + (rho*u*sigma)_x) + u_x = -sigma/mu_tilde",
        }


def reduce_1d(params: ModelParams, eos) -> System1D:
    """1D reduction: three fields, mu_tilde = (2/3) mu + nu, tau absorbed."""
    return System1D(eos=eos, eps=params.eps, mu_tilde=params.mu_tilde)
