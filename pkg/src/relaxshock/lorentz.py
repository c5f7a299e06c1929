"""Minkowski algebra: metric helpers, boosts, and the projector quadruple.

Signature (-, +, +, +), fixed by the convention that timelike vectors have
negative square.  The projector set decomposes symmetric rank-2 tensors
relative to a unit timelike u into shear (S), bulk (B), heat-flux-like
mixed (Q) and purely temporal (H) parts, with Pi = g + u (x) u the spatial
projector orthogonal to u.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

METRIC = np.diag([-1.0, 1.0, 1.0, 1.0])


def lower(v):
    """v_alpha = g_{alpha beta} v^beta."""
    return METRIC @ np.asarray(v, dtype=float)


def raise_index(v):
    """v^alpha = g^{alpha beta} v_beta (the metric is its own inverse)."""
    return METRIC @ np.asarray(v, dtype=float)


def minkowski_dot(a, b):
    """a_alpha b^alpha for two contravariant vectors."""
    return float(np.asarray(a) @ METRIC @ np.asarray(b))


@dataclass
class Vec4:
    """Contravariant 4-vector with signature bookkeeping."""

    components: np.ndarray

    def __post_init__(self):
        self.components = np.asarray(self.components, dtype=float)
        if self.components.shape != (4,):
            raise DomainError("a 4-vector has exactly 4 components")

    def lowered(self):
        return lower(self.components)

    def square(self):
        return minkowski_dot(self.components, self.components)

    def is_timelike(self):
        return self.square() < 0.0


@dataclass
class SymTensor4:
    """Symmetric contravariant rank-2 tensor."""

    components: np.ndarray

    def __post_init__(self):
        self.components = np.asarray(self.components, dtype=float)
        if self.components.shape != (4, 4):
            raise DomainError("a rank-2 tensor has shape (4, 4)")
        if not np.allclose(self.components, self.components.T, atol=1e-12):
            raise DomainError("tensor must be symmetric")

    def lowered(self):
        return METRIC @ self.components @ METRIC


def boost_matrix(velocity):
    """Lorentz boost Lambda^alpha_beta for a 3-velocity with |v| < 1."""
    v = np.asarray(velocity, dtype=float)
    v2 = float(v @ v)
    if v2 >= 1.0:
        raise DomainError("boost velocity must satisfy |v| < 1")
    if v2 == 0.0:
        return np.eye(4)
    g = 1.0 / np.sqrt(1.0 - v2)
    L = np.eye(4)
    L[0, 0] = g
    L[0, 1:] = L[1:, 0] = -g * v
    L[1:, 1:] = np.eye(3) + (g - 1.0) * np.outer(v, v) / v2
    return L


def random_boost(rng, vmax=0.6):
    v = rng.uniform(-1.0, 1.0, size=3)
    v *= vmax * rng.uniform(0.1, 1.0) / np.linalg.norm(v)
    return boost_matrix(v)


def random_symmetric(rng, scale=1.0):
    a = rng.normal(size=(4, 4)) * scale
    return 0.5 * (a + a.T)


# ---------------------------------------------------------------------------
# projector quadruple
# ---------------------------------------------------------------------------

def _sym_identity():
    d = np.eye(4)
    return 0.5 * (np.einsum("ag,bd->abgd", d, d) + np.einsum("ad,bg->abgd", d, d))


@dataclass
class ProjectorSet:
    """The four complementing projectors at a unit timelike u.

    Stored with index layout P[alpha, beta, gamma, delta] acting on
    covariant symmetric tensors via (P V)_{alpha beta} =
    P_{alpha beta}^{gamma delta} V_{gamma delta}.
    """

    u: np.ndarray  # contravariant, u.u = -1
    shear: np.ndarray
    bulk: np.ndarray
    heat: np.ndarray
    temporal: np.ndarray

    def all(self):
        return {"S": self.shear, "B": self.bulk, "Q": self.heat, "H": self.temporal}

    def apply(self, which, V):
        """Component of a covariant symmetric tensor V."""
        return np.einsum("abgd,gd->ab", self.all()[which], np.asarray(V))

    def verify(self, rng=None, n_checks=8, tol=1e-12):
        """Idempotence / orthogonality / completeness on random tensors."""
        rng = rng or np.random.default_rng(0)
        keys = ["S", "B", "Q", "H"]
        for _ in range(n_checks):
            V = random_symmetric(rng)
            parts = {k: self.apply(k, V) for k in keys}
            total = sum(parts.values())
            if np.max(np.abs(total - V)) > tol * max(1.0, np.max(np.abs(V))):
                return False
            for k in keys:
                for l in keys:
                    pp = np.einsum("abgd,gd->ab", self.all()[k], parts[l])
                    want = parts[l] if k == l else 0.0
                    if np.max(np.abs(pp - want)) > 1e2 * tol * max(1.0, np.max(np.abs(V))):
                        return False
        return True


def projectors(u) -> ProjectorSet:
    """Build the projector quadruple at u (normalized if within 1e-8 of unit).

    Pi = g + u (x) u is the unique projector annihilating u that is
    consistent with the completeness identity.
    """
    u = np.asarray(u, dtype=float)
    sq = minkowski_dot(u, u)
    if sq >= 0.0:
        raise DomainError("u must be timelike")
    if abs(sq + 1.0) > 1e-8:
        raise DomainError(f"u must be unit timelike (u.u = {sq:.6g})")
    u = u / np.sqrt(-sq)
    u_lo = lower(u)

    pi_mixed = np.eye(4) + np.outer(u_lo, u)          # Pi_alpha^gamma
    pi_lo = METRIC + np.outer(u_lo, u_lo)             # Pi_{alpha beta}
    pi_up = METRIC + np.outer(u, u)                   # Pi^{gamma delta}

    sym = lambda T: 0.5 * (T + T.transpose(1, 0, 2, 3))
    sym_gd = lambda T: 0.5 * (T + T.transpose(0, 1, 3, 2))

    shear = sym(sym_gd(np.einsum("ag,bd->abgd", pi_mixed, pi_mixed)))
    shear = shear - np.einsum("ab,gd->abgd", pi_lo, pi_up) / 3.0
    bulk = np.einsum("ab,gd->abgd", pi_lo, pi_up) / 3.0
    heat = -sym_gd(np.einsum("ag,b,d->abgd", pi_mixed, u_lo, u)
                   + np.einsum("bg,a,d->abgd", pi_mixed, u_lo, u))
    temporal = np.einsum("a,b,g,d->abgd", u_lo, u_lo, u, u)
    ps = ProjectorSet(u, shear, bulk, heat, temporal)
    if not ps.verify():
        raise DomainError("projector identities failed at construction")
    return ps
