"""Numerical Evans functions for viscous and relaxation shock profiles.

The eigenvalue problem is the linearization of the 1D system about a
profile, written for the primitive perturbations z = (r, v, s) of
(rho, u, sigma).  It is linear in the derivatives, so one symbolic solve
puts it in the explicit form z' = A(xi, lambda) z with

    A(xi, lambda) = -M(xi)^-1 (N0(xi) + lambda N1(xi)),

i.e. A is affine in lambda: A = A0(xi) + lambda A1(xi).  The solvability
condition is U != 0 for eps = 0 and additionally 1 - eps m g'(U) != 0 for
eps > 0.  At a constant state every profile-derivative coefficient
vanishes and the matrix reduces to the frozen-coefficient elimination.

D(lambda) is the determinant, at xi = 0, of the solution growing from
-infinity (1-dim) against the solutions decaying at +infinity (2-dim),
the bases being spectral-projector images of fixed reference vectors so
that D is analytic and single-valued along closed contours.  Propagation
is batched fixed-step RK4 with QR renormalization and exact determinant
bookkeeping in log scale; only zeros and winding numbers are
normalization-stable outputs, so comparisons always divide by the value
at a reference point.

Contour samples are independent work items; the eigenvalue-continuation
pass that fixes subspace membership is a cheap sequential sweep over the
ordered samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DomainError, EvansError, RefinementError, SplittingError
from .profiles import ProfileSolution

_GAP_TOL = 1e-9


# ---------------------------------------------------------------------------
# coefficient matrices
# ---------------------------------------------------------------------------

class EvansProblem:
    """Evans-function data for one profile: coefficients, asymptotics, caches."""

    def __init__(self, profile: ProfileSolution, window=None):
        self.profile = profile
        self.eps = profile.eps
        self.mu_tilde = profile.mu_tilde
        self.setup = profile.setup
        self.eos = profile.setup.eos
        self.m = profile.m
        self.C = profile.setup.momentum_const
        if self.eps > 0.0 and self.m == 0.0:
            raise DomainError("relaxation Evans function needs nonzero mass transfer")
        rates = self._endpoint_rates()
        auto = min(profile.L, max(18.0, 24.0 / min(rates)))
        self.L = float(window) if window is not None else float(auto)
        self._node_cache = {}

    def _endpoint_rates(self):
        s = self.setup
        out = []
        for u in (s.u_minus, s.u_plus):
            d = 1.0 - self.eps * self.m * float(s.dg(u))
            out.append(abs(float(s.dg(u))) / (self.mu_tilde * max(d, 1e-12)))
        return out

    # -- pointwise assembly --------------------------------------------------
    def _mn(self, xi):
        """M, N0, N1 stacked over xi (each (n, 3, 3), real)."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        R, U, S = self.profile.evaluate(xi)
        dR, dU, dS = self.profile.derivatives(xi)
        eos = self.eos
        cs2 = eos.dp_drho(R)
        dcs2 = eos.d2p_drho2(R)
        beta = U * U + cs2
        dbeta = 2.0 * U * dU + dcs2 * dR
        eps = self.eps
        n = xi.size
        M = np.zeros((n, 3, 3))
        N0 = np.zeros((n, 3, 3))
        N1 = np.zeros((n, 3, 3))
        M[:, 0, 0], M[:, 0, 1] = U, R
        M[:, 1, 0], M[:, 1, 1], M[:, 1, 2] = beta, 2.0 * self.m, 1.0
        M[:, 2, 0] = eps * U * S
        M[:, 2, 1] = 1.0 + eps * R * S
        M[:, 2, 2] = eps * self.m
        N0[:, 0, 0], N0[:, 0, 1] = dU, dR
        N0[:, 1, 0] = dbeta
        N0[:, 2, 0] = eps * (dU * S + U * dS)
        N0[:, 2, 1] = eps * (dR * S + R * dS)
        N0[:, 2, 2] = 1.0 / self.mu_tilde
        N1[:, 0, 0] = 1.0
        N1[:, 1, 0], N1[:, 1, 1] = U, R
        N1[:, 2, 0] = eps * S
        N1[:, 2, 2] = eps * R
        return M, N0, N1

    def a_parts(self, xi):
        """(A0, A1) with A(xi, lambda) = A0 + lambda A1, stacked over xi."""
        M, N0, N1 = self._mn(xi)
        det = np.linalg.det(M)
        if np.any(np.abs(det) < 1e-12):
            raise EvansError("singular linear solve: U = 0 or 1 - eps m g'(U) = 0 on the window")
        return -np.linalg.solve(M, N0), -np.linalg.solve(M, N1)

    def coefficient_matrix(self, xi, lam):
        """A(xi, lambda), complex (..., 3, 3)."""
        A0, A1 = self.a_parts(xi)
        out = A0.astype(complex) + complex(lam) * A1
        return out[0] if np.isscalar(xi) else out

    def asymptotic_parts(self):
        """A0, A1 of the constant-coefficient limits at -inf and +inf."""
        s = self.setup
        out = []
        for rho, u in ((s.rho_minus, s.u_minus), (s.rho_plus, s.u_plus)):
            beta = u * u + float(self.eos.dp_drho(rho))
            M = np.array([[u, rho, 0.0], [beta, 2.0 * self.m, 1.0],
                          [0.0, 1.0, self.eps * self.m]])
            N0 = np.zeros((3, 3))
            N0[2, 2] = 1.0 / self.mu_tilde
            N1 = np.array([[1.0, 0.0, 0.0], [u, rho, 0.0],
                           [0.0, 0.0, self.eps * rho]])
            Minv = np.linalg.inv(M)
            out.append((-Minv @ N0, -Minv @ N1))
        return out  # [(A0-, A1-), (A0+, A1+)]

    def asymptotic_matrix(self, lam, side):
        (a0m, a1m), (a0p, a1p) = self.asymptotic_parts()
        if side == "minus":
            return a0m.astype(complex) + complex(lam) * a1m
        return a0p.astype(complex) + complex(lam) * a1p

    # -- integration nodes ---------------------------------------------------
    def nodes(self, n_steps):
        """Half-step coefficient tables for both directions, cached."""
        key = int(n_steps)
        if key not in self._node_cache:
            xi_up = np.linspace(-self.L, 0.0, 2 * n_steps + 1)
            xi_dn = np.linspace(self.L, 0.0, 2 * n_steps + 1)
            self._node_cache[key] = (self.a_parts(xi_up), self.a_parts(xi_dn))
        return self._node_cache[key]

    def adjoint_nodes(self, n_steps):
        """Downstream tables of the 2-form evolution (tr A) I - A^T, cached."""
        key = ("adj", int(n_steps))
        if key not in self._node_cache:
            _, (A0, A1) = self.nodes(n_steps)

            def tilde(B):
                tr = np.trace(B, axis1=1, axis2=2)
                return tr[:, None, None] * np.eye(3)[None] - np.transpose(B, (0, 2, 1))

            self._node_cache[key] = (tilde(A0), tilde(A1))
        return self._node_cache[key]


@dataclass
class BuiltEvp:
    """First-order form at one spectral parameter: A(xi) plus its limits."""

    lam: complex
    a_minus: np.ndarray
    a_plus: np.ndarray
    matrix: object  # callable xi -> (3, 3) complex

    def __call__(self, xi):
        return self.matrix(xi)


def build_evp(profile: ProfileSolution, lam, eps=None) -> BuiltEvp:
    """Coefficient matrix A(xi, lambda) of the linearized profile equations.

    ``eps`` defaults to the profile's own relaxation scale and must agree
    with it when given.
    """
    if eps is not None and abs(eps - profile.eps) > 0.0:
        raise DomainError("eps must match the profile it linearizes")
    prob = EvansProblem(profile)
    return BuiltEvp(complex(lam), prob.asymptotic_matrix(lam, "minus"),
                    prob.asymptotic_matrix(lam, "plus"),
                    lambda xi: prob.coefficient_matrix(xi, lam))


# ---------------------------------------------------------------------------
# asymptotic splitting
# ---------------------------------------------------------------------------

@dataclass
class SplitBases:
    unstable_minus: np.ndarray  # (3, k)
    stable_plus: np.ndarray     # (3, 3 - k)
    unstable_dim: int
    stable_dim: int
    eigs_minus: np.ndarray
    eigs_plus: np.ndarray


def _projector(A, eigs, members):
    """Spectral projector onto the eigenvalues selected by ``members``.

    Uses the complementary product formula, so only the gap between the
    group and its complement needs to be resolved.
    """
    members = np.asarray(members, dtype=bool)
    comp = ~members
    if comp.sum() == 0:
        return np.eye(A.shape[0], dtype=complex)
    if members.sum() <= comp.sum():
        sel, direct = members, True
    else:
        sel, direct = comp, False
    eye = np.eye(A.shape[0], dtype=complex)
    # Lagrange form: P_sel = sum_{k in sel} prod_{j != k} (A - mu_j)/(mu_k - mu_j)
    P = np.zeros_like(eye)
    idx_sel = np.nonzero(sel)[0]
    for k in idx_sel:
        term = eye.copy()
        denom = 1.0 + 0.0j
        for j in range(len(eigs)):
            if j == k:
                continue
            term = term @ (A - eigs[j] * eye)
            denom *= eigs[k] - eigs[j]
        P = P + term / denom
    return P if direct else eye - P


def _group_gap(eigs, members):
    members = np.asarray(members, dtype=bool)
    if members.all() or not members.any():
        return np.inf
    return float(np.min(np.abs(eigs[members][:, None] - eigs[~members][None, :])))


def asymptotic_splitting(a_minus, a_plus, gap_tol=_GAP_TOL) -> SplitBases:
    """Unstable basis at -infinity and stable basis at +infinity by Re-sign.

    Requires consistent splitting (no eigenvalue within gap_tol of the
    imaginary axis) and complementary dimensions.
    """
    a_minus = np.asarray(a_minus, dtype=complex)
    a_plus = np.asarray(a_plus, dtype=complex)
    eig_m = np.linalg.eigvals(a_minus)
    eig_p = np.linalg.eigvals(a_plus)
    if np.min(np.abs(eig_m.real)) < gap_tol or np.min(np.abs(eig_p.real)) < gap_tol:
        raise SplittingError("an asymptotic eigenvalue sits on the imaginary axis")
    mem_m = eig_m.real > 0.0
    mem_p = eig_p.real < 0.0
    k, l = int(mem_m.sum()), int(mem_p.sum())
    if k + l != 3:
        raise SplittingError(f"dimension mismatch: {k} unstable + {l} stable != 3")
    Pm = _projector(a_minus, eig_m, mem_m)
    Pp = _projector(a_plus, eig_p, mem_p)
    Bm = _best_columns(Pm, k)
    Bp = _best_columns(Pp, l)
    return SplitBases(Bm, Bp, k, l, eig_m, eig_p)


def _best_columns(P, k):
    """A well-conditioned k-column basis of the range of the projector P.

    Deterministic: QR with column pivoting on P, then each vector scaled so
    its largest-magnitude component is real positive.
    """
    Pr = P.real if np.max(np.abs(P.imag)) < 1e-9 * max(1.0, np.max(np.abs(P.real))) else P
    q, _, _ = _qr_pivot(Pr)
    B = q[:, :k].astype(complex)
    for j in range(k):
        i = int(np.argmax(np.abs(B[:, j])))
        ph = B[i, j] / abs(B[i, j])
        B[:, j] = B[:, j] / ph
    return B


def _qr_pivot(Amat):
    import scipy.linalg
    q, r, p = scipy.linalg.qr(Amat, pivoting=True)
    return q, r, p


# ---------------------------------------------------------------------------
# contours
# ---------------------------------------------------------------------------

@dataclass
class ContourSpec:
    """Closed contour: half-disc boundary (radius C, left edge Re = delta0)
    or a circle.  Counterclockwise, parametrized over [0, 1)."""

    kind: str
    radius: float
    delta0: float = 0.0
    center: complex = 0.0 + 0.0j
    n_init: int = 128
    max_samples: int = 4096

    def __post_init__(self):
        if self.kind not in ("half_disc", "circle"):
            raise DomainError(f"unknown contour kind {self.kind!r}")
        if self.radius <= 0.0:
            raise DomainError("contour radius must be positive")
        if self.kind == "half_disc" and not (0.0 < self.delta0 < self.radius):
            raise DomainError("half-disc requires 0 < delta0 < radius")

    def point(self, t):
        """lambda(t) for t in [0, 1), counterclockwise, t = 0 at max Re."""
        t = np.asarray(t, dtype=float) % 1.0
        if self.kind == "circle":
            return self.center + self.radius * np.exp(2j * np.pi * t)
        C, d0 = self.radius, self.delta0
        th0 = np.arccos(d0 / C)
        y0 = np.sqrt(C * C - d0 * d0)
        arc_len = 2.0 * th0 * C
        chord_len = 2.0 * y0
        total = arc_len + chord_len
        s = t * total
        # piece 1: upper arc from angle 0 to +th0
        # piece 2: chord from (d0, y0) down to (d0, -y0)
        # piece 3: lower arc from angle -th0 to 0
        out = np.empty(np.shape(s), dtype=complex)
        s = np.atleast_1d(s)
        o = np.atleast_1d(out)
        m1 = s <= 0.5 * arc_len
        o[m1] = C * np.exp(1j * (s[m1] / C))
        m2 = (~m1) & (s <= 0.5 * arc_len + chord_len)
        o[m2] = d0 + 1j * (y0 - (s[m2] - 0.5 * arc_len))
        m3 = ~(m1 | m2)
        o[m3] = C * np.exp(1j * (-th0 + (s[m3] - 0.5 * arc_len - chord_len) / C))
        return o.reshape(np.shape(t)) if np.ndim(t) else complex(o[0])


def half_disc_contour(C, delta0, n_init=192, max_samples=4096):
    return ContourSpec("half_disc", C, delta0=delta0, n_init=n_init, max_samples=max_samples)


def circle_contour(radius, center=0.0, n_init=96, max_samples=4096):
    return ContourSpec("circle", radius, center=complex(center), n_init=n_init,
                       max_samples=max_samples)


# ---------------------------------------------------------------------------
# batched propagation
# ---------------------------------------------------------------------------

def _propagate(parts, lams, Y0, h, renorm_every=20):
    """RK4-propagate the block Y0 (nL, 3, k) through the coefficient tables.

    parts = (A0_nodes, A1_nodes) sampled at half steps from the start
    point toward xi = 0; ``h`` is the signed step.  Returns (Y, logfac)
    with the exact determinant bookkeeping of the QR renormalizations.
    """
    A0n, A1n = parts
    n_steps = (A0n.shape[0] - 1) // 2
    lam_col = np.asarray(lams, dtype=complex)[:, None, None]
    Y = np.array(Y0, dtype=complex, copy=True)
    logfac = np.zeros(len(lams), dtype=complex)
    for i in range(n_steps):
        As = A0n[2 * i][None] + lam_col * A1n[2 * i][None]
        Am = A0n[2 * i + 1][None] + lam_col * A1n[2 * i + 1][None]
        Ae = A0n[2 * i + 2][None] + lam_col * A1n[2 * i + 2][None]
        k1 = As @ Y
        k2 = Am @ (Y + (0.5 * h) * k1)
        k3 = Am @ (Y + (0.5 * h) * k2)
        k4 = Ae @ (Y + h * k3)
        Y = Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (i + 1) % renorm_every == 0 or i == n_steps - 1:
            Q, R = np.linalg.qr(Y)
            diag = np.einsum("...ii->...i", R)
            if np.any(diag == 0.0):
                raise EvansError("solution block degenerated during propagation")
            logfac += np.sum(np.log(diag.astype(complex)), axis=1)
            Y = Q
    return Y, logfac


# ---------------------------------------------------------------------------
# eigenvalue continuation along sample sequences
# ---------------------------------------------------------------------------

def _adjugate3(M):
    """Adjugate of stacked 3x3 matrices: adj(M) M = det(M) I."""
    M = np.asarray(M)
    out = np.empty_like(M)
    for i in range(3):
        for j in range(3):
            r = [k for k in range(3) if k != j]
            c = [k for k in range(3) if k != i]
            minor = (M[..., r[0], c[0]] * M[..., r[1], c[1]]
                     - M[..., r[0], c[1]] * M[..., r[1], c[0]])
            out[..., i, j] = (-1.0) ** (i + j) * minor
    return out


def _root_gap(eigs, k):
    return float(np.min(np.abs(np.delete(eigs, k) - eigs[k])))


def _continue_root(a0, a1, mu_prev, gap_prev, lam0, lam1, depth=0):
    """Analytic continuation of one simple root along the segment lam0 -> lam1.

    Returns (mu, gap) at lam1.  A proximity match is only accepted when the
    motion is small against the separation at *both* endpoints and clearly
    dominates the second-closest candidate; otherwise the segment is
    bisected.  A genuine collision on the path raises SplittingError.
    """
    eigs = np.linalg.eigvals(a0 + complex(lam1) * a1)
    dists = np.abs(eigs - mu_prev)
    k = int(np.argmin(dists))
    mu = complex(eigs[k])
    motion = float(dists[k])
    second = float(np.min(np.delete(dists, k)))
    gap = _root_gap(eigs, k)
    if gap < _GAP_TOL:
        raise SplittingError(
            f"root separation lost at lambda={lam1:.6g} (gap {gap:.2e})")
    if motion <= 0.4 * min(gap, gap_prev) and (second >= 2.5 * motion or motion == 0.0):
        return mu, gap
    if depth >= 48:
        raise SplittingError(f"root continuation unresolved near lambda={lam1:.6g}")
    mid = 0.5 * (complex(lam0) + complex(lam1))
    mu_mid, gap_mid = _continue_root(a0, a1, mu_prev, gap_prev, lam0, mid, depth + 1)
    return _continue_root(a0, a1, mu_mid, gap_mid, mid, lam1, depth + 1)


def _track_root(a0, a1, base_root, base_lam, lams, closed):
    """Continue one simple eigenvalue along ordered samples.

    For a closed contour the continuation must return to itself; a failure
    means a dispersion branch point is enclosed.
    """
    n = lams.size
    out = np.empty(n, dtype=complex)
    eigs0 = np.linalg.eigvals(a0 + complex(base_lam) * a1)
    k0 = int(np.argmin(np.abs(eigs0 - base_root)))
    prev, prev_lam, prev_gap = complex(base_root), complex(base_lam), _root_gap(eigs0, k0)
    for i in range(n):
        out[i], prev_gap = _continue_root(a0, a1, prev, prev_gap, prev_lam, lams[i])
        prev, prev_lam = out[i], complex(lams[i])
    if closed:
        mu_close, _ = _continue_root(a0, a1, prev, prev_gap, prev_lam, lams[0])
        if abs(mu_close - out[0]) > 1e-6 * (1.0 + abs(out[0])):
            raise SplittingError(
                "eigenvalue continuation does not close up: a dispersion branch "
                "point is enclosed by the contour; shrink it")
    return out


class EvansEvaluator:
    """Evaluates log D along ordered sample sequences.

    The solution growing at -infinity is propagated directly; the 2-dim
    subspace decaying at +infinity is represented by its annihilating
    2-form phi, which obeys phi' = (tr A) phi - A^T phi, so that
    D = <phi(0), y(0)>.  Both initial vectors are adjugate eigenvectors of
    the asymptotic matrices normalized by a fixed component (anchored at a
    real base point), an analytic, holonomy-free choice; anchors can be
    shared across a family so that normalized comparisons line up.
    """

    def __init__(self, problem: EvansProblem, base_lambda, anchors=None,
                 n_steps=None, renorm_every=20, anchor_floor=0.02):
        self.problem = problem
        self.base_lambda = complex(base_lambda)
        if self.base_lambda.imag != 0.0 or self.base_lambda.real <= 0.0:
            raise DomainError("base point must be real positive")
        am = problem.asymptotic_matrix(self.base_lambda, "minus")
        ap = problem.asymptotic_matrix(self.base_lambda, "plus")
        eig_m = np.linalg.eigvals(am)
        eig_p = np.linalg.eigvals(ap)
        if int(np.sum(eig_m.real > 0.0)) != 1 or int(np.sum(eig_p.real > 0.0)) != 1:
            raise SplittingError("expected a (1 unstable, 2 stable) splitting at the base")
        self.mu_minus_base = complex(eig_m[np.argmax(eig_m.real)])
        self.mu_plus_base = complex(eig_p[np.argmax(eig_p.real)])
        self.anchor_floor = anchor_floor
        if anchors is None:
            V = _adjugate3(self.mu_minus_base * np.eye(3) - am)
            j0 = int(np.argmax(np.linalg.norm(V, axis=0)))
            i0 = int(np.argmax(np.abs(V[:, j0])))
            W = _adjugate3(self.mu_plus_base * np.eye(3) - ap)
            k0 = int(np.argmax(np.linalg.norm(W, axis=1)))
            l0 = int(np.argmax(np.abs(W[k0, :])))
            anchors = (j0, i0, k0, l0)
        self.anchors = anchors
        self.n_steps = n_steps
        self.renorm_every = renorm_every

    def _tracked_roots(self, lams, closed):
        (a0m, a1m), (a0p, a1p) = self.problem.asymptotic_parts()
        mu_m = _track_root(a0m, a1m, self.mu_minus_base, self.base_lambda, lams, closed)
        mu_p = _track_root(a0p, a1p, self.mu_plus_base, self.base_lambda, lams, closed)
        return mu_m, mu_p

    def _initial_vectors(self, lams, mu_m, mu_p):
        j0, i0, k0, l0 = self.anchors
        n = lams.size
        lam_col = np.asarray(lams, dtype=complex)[:, None, None]
        (a0m, a1m), (a0p, a1p) = self.problem.asymptotic_parts()
        Am = a0m[None] + lam_col * a1m[None]
        Ap = a0p[None] + lam_col * a1p[None]
        eye = np.eye(3)[None]
        V = _adjugate3(mu_m[:, None, None] * eye - Am)
        col = V[:, :, j0]
        if np.any(np.abs(col[:, i0]) < self.anchor_floor * np.linalg.norm(col, axis=1)):
            raise SplittingError("upstream anchor component degenerated along the contour")
        y0 = col / col[:, i0][:, None]
        W = _adjugate3(mu_p[:, None, None] * eye - Ap)
        row = W[:, k0, :]
        if np.any(np.abs(row[:, l0]) < self.anchor_floor * np.linalg.norm(row, axis=1)):
            raise SplittingError("downstream anchor component degenerated along the contour")
        phi0 = row / row[:, l0][:, None]
        return y0[:, :, None], phi0[:, :, None]

    def _steps_for(self, lams):
        if self.n_steps is not None:
            return self.n_steps
        rate = 1.0
        for side in ("minus", "plus"):
            for lam in (np.max(np.abs(lams)), 1.0):
                A = self.problem.asymptotic_matrix(complex(lam), side)
                rate = max(rate, float(np.max(np.abs(np.linalg.eigvals(A)))))
        h = min(0.012, 0.25 / rate)
        return int(np.ceil(self.problem.L / h))

    def flattening_exponent(self, lams, closed=False):
        """The predictable asymptotic exponent: growth mu_minus(lambda) L of
        the upstream solution minus decay (tr A_plus - mu_plus)(lambda) L of
        the downstream 2-form.  A single-valued analytic function along the
        sample path, so dividing it out changes neither zeros nor windings.
        """
        lams = np.asarray(lams, dtype=complex)
        mu_m, mu_p = self._tracked_roots(lams, closed)
        _, (a0p, a1p) = self.problem.asymptotic_parts()
        tr_plus = np.trace(a0p) + lams * np.trace(a1p)
        L = self.problem.L
        return L * mu_m - L * (tr_plus - mu_p)

    def logd(self, lams, closed=False, flatten=True):
        """log of the (flattened) Evans function at an ordered sample sequence.

        With ``flatten`` the exponent above is divided out, leaving a phase
        slow enough for contour refinement to sample faithfully (no hidden
        2 pi aliasing).  Set ``closed`` for full loops to enable the
        continuation closure check.
        """
        lams = np.asarray(lams, dtype=complex)
        mu_m, mu_p = self._tracked_roots(lams, closed)
        y0, phi0 = self._initial_vectors(lams, mu_m, mu_p)
        n_steps = self._steps_for(lams)
        up, dn = self.problem.nodes(n_steps)
        adj_dn = self.problem.adjoint_nodes(n_steps)
        h = self.problem.L / n_steps
        Y, lfy = _propagate(up, lams, y0, h, self.renorm_every)
        Phi, lfp = _propagate(adj_dn, lams, phi0, -h, self.renorm_every)
        d = np.sum(Phi[:, :, 0] * Y[:, :, 0], axis=1)
        if np.any(d == 0.0):
            raise EvansError("Evans product vanished identically at a sample")
        out = np.log(d) + lfy + lfp
        if flatten:
            _, (a0p, a1p) = self.problem.asymptotic_parts()
            tr_plus = np.trace(a0p) + lams * np.trace(a1p)
            L = self.problem.L
            out = out - L * mu_m + L * (tr_plus - mu_p)
        return out


def evans_eval(problem: EvansProblem, lam, base_lambda=None) -> complex:
    """D(lambda) for a single spectral parameter with Re(lambda) > 0.

    Value is meaningful up to the construction's nonzero analytic
    normalization; use ratios or winding numbers across calls.
    """
    lam = complex(lam)
    base = base_lambda if base_lambda is not None else max(lam.real, 0.5)
    ev = EvansEvaluator(problem, base)
    return complex(np.exp(ev.logd(np.array([lam]))[0]))


# ---------------------------------------------------------------------------
# winding numbers and zero location
# ---------------------------------------------------------------------------

@dataclass
class WindingResult:
    winding: int
    raw: float
    max_step_arg: float
    n_samples: int
    lambdas: np.ndarray = field(repr=False, default=None)
    d_values: np.ndarray = field(repr=False, default=None)


def _wrap_angle(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def winding_number(problem: EvansProblem, contour: ContourSpec,
                   evaluator: EvansEvaluator = None) -> WindingResult:
    """Argument-principle winding of D along the closed contour.

    Per-step |Delta arg| is driven below pi/2 by bisection refinement
    (budget contour.max_samples); the accumulated argument must round to
    an integer within 0.1 or the result is rejected.
    """
    if evaluator is None:
        base = contour.point(0.0)
        evaluator = EvansEvaluator(problem, base.real)
    ts = np.linspace(0.0, 1.0, contour.n_init, endpoint=False)
    logd = evaluator.logd(contour.point(ts), closed=True)
    for _ in range(24):
        dphi = _wrap_angle(np.diff(np.concatenate([logd.imag, logd.imag[:1]])))
        bad = np.nonzero(np.abs(dphi) >= 0.5 * np.pi)[0]
        if bad.size == 0:
            break
        if ts.size + bad.size > contour.max_samples:
            raise RefinementError(
                f"refinement budget exceeded ({ts.size} samples, {bad.size} bad steps)")
        t_new = []
        for i in bad:
            t_next = ts[(i + 1) % ts.size] + (1.0 if i == ts.size - 1 else 0.0)
            t_new.append(0.5 * (ts[i] + t_next) % 1.0)
        ts = np.sort(np.concatenate([ts, np.asarray(t_new)]))
        logd = evaluator.logd(contour.point(ts), closed=True)
    else:
        raise RefinementError("refinement did not settle within the iteration cap")
    dphi = _wrap_angle(np.diff(np.concatenate([logd.imag, logd.imag[:1]])))
    raw = float(np.sum(dphi) / (2.0 * np.pi))
    w = int(np.round(raw))
    if abs(raw - w) > 0.1:
        raise EvansError(f"winding {raw:.4f} does not round to an integer")
    d_scaled = np.exp(logd - np.max(logd.real))
    return WindingResult(w, raw, float(np.max(np.abs(dphi))), ts.size,
                         contour.point(ts), d_scaled)


def evans_value_at_zero(problem: EvansProblem, radius=0.1, n=128):
    """(|D(0)|, max |D| on the circle), in a common scaling.

    D(0) is the mean of D over the circle (mean-value property of the
    analytic Evans function), so the ratio of the two returns measures how
    exactly the translation eigenvalue sits at the origin.  The radius
    must stay below the nearest dispersion branch point; the continuation
    closure check aborts if it does not.
    """
    contour = circle_contour(radius, n_init=n)
    ev = EvansEvaluator(problem, radius)
    ts = np.linspace(0.0, 1.0, n, endpoint=False)
    logd = ev.logd(contour.point(ts), closed=True)
    scale = np.max(logd.real)
    d = np.exp(logd - scale)
    return float(np.abs(np.mean(d))), float(np.max(np.abs(d)))


# ---------------------------------------------------------------------------
# eps -> 0 convergence of the Evans functions
# ---------------------------------------------------------------------------

@dataclass
class EvansConvergenceRow:
    eps: float
    sup_deviation: float


def evans_convergence(setup, mu_tilde, eps_list, contour: ContourSpec = None,
                      n_samples=192, lam_ref=None, profile_tol=1e-9):
    """sup-contour deviation of normalized relaxation Evans functions from the
    viscous one, per eps.

    Matched construction across the family: a common integration window,
    the viscous anchors for every initial vector, one common flattening
    exponent (the viscous one), and division by the value at lam_ref.
    What remains is exactly the normalization-free content whose eps -> 0
    convergence is being probed.
    """
    from .profiles import ns_profile, relaxation_profile

    if contour is None:
        contour = half_disc_contour(5.0, 0.05)
    if lam_ref is None:
        lam_ref = 0.5 * contour.radius
    ts = np.linspace(0.0, 1.0, n_samples, endpoint=False)
    lams = contour.point(ts)
    lam_ref_arr = np.array([complex(lam_ref)])

    prof_v = ns_profile(setup, mu_tilde, resid_tol=profile_tol)
    profs_r = {eps: relaxation_profile(setup, mu_tilde, eps, resid_tol=profile_tol)
               for eps in eps_list if eps > 0.0}
    window = min([prof_v.L] + [p.L for p in profs_r.values()])
    window = min(window, EvansProblem(prof_v).L)

    prob_v = EvansProblem(prof_v, window=window)
    base = contour.point(0.0).real
    ev_v = EvansEvaluator(prob_v, base)

    def normalized(ev):
        raw = ev.logd(lams, closed=True)
        ref = ev.logd(lam_ref_arr)[0]
        return np.exp(raw - ref)

    dv = normalized(ev_v)
    rows = []
    for eps in sorted(eps_list, reverse=True):
        if eps == 0.0:
            rows.append(EvansConvergenceRow(0.0, 0.0))
            continue
        prob_r = EvansProblem(profs_r[eps], window=window)
        ev_r = EvansEvaluator(prob_r, base, anchors=ev_v.anchors)
        dr = normalized(ev_r)
        rows.append(EvansConvergenceRow(float(eps), float(np.max(np.abs(dr - dv)))))
    return rows
