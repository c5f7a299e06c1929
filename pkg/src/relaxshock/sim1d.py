"""1D finite-volume solvers: the relaxation system and its Navier-Stokes limit.

Scheme: first-order local Lax-Friedrichs (Rusanov) for the convective
fluxes, centered differences for the non-conservative u_x coupling, and an
exact pointwise implicit solve of the linear relaxation source.  The
Navier-Stokes reference solver treats the viscous term (mu_tilde u_x)_x
explicitly with second-order central differences.

Runs never clip: vacuum, NaN or CFL trouble aborts loudly with cell/time
diagnostics.  Independent runs (an eps sweep) share no mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CflViolationError, DomainError, VacuumError
from .model import System1D

DEFAULT_CFL = 0.45


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1D cell-centered grid on [a, b]."""

    n: int
    a: float = 0.0
    b: float = 1.0
    bc: str = "periodic"

    def __post_init__(self):
        if self.n < 8:
            raise DomainError(f"need at least 8 cells, got {self.n}")
        if self.b <= self.a:
            raise DomainError("empty domain")
        if self.bc not in ("periodic", "outflow"):
            raise DomainError(f"unknown boundary mode {self.bc!r}")

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def x(self) -> np.ndarray:
        return self.a + (np.arange(self.n) + 0.5) * self.dx


@dataclass
class Trajectory:
    """Snapshots plus the per-step total-energy series of a run."""

    grid: Grid1D
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    energy_times: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    failed: bool = False

    def snapshot(self, t, U):
        self.times.append(float(t))
        self.states.append(np.array(U, copy=True))

    @property
    def final(self):
        return self.states[-1]


def _extend(U, bc):
    """One ghost cell on each side."""
    if bc == "periodic":
        return np.concatenate([U[:, -1:], U, U[:, :1]], axis=1)
    return np.concatenate([U[:, :1], U, U[:, -1:]], axis=1)


def _check_positive(rho, t, what="density"):
    if not np.all(np.isfinite(rho)):
        bad = int(np.argmin(np.isfinite(rho)))
        raise VacuumError(f"non-finite {what} in cell {bad} at t={t:.6g}", cell=bad, time=t)
    if np.any(rho <= 0.0):
        bad = int(np.argmin(rho))
        raise VacuumError(f"vacuum ({what} <= 0) in cell {bad} at t={t:.6g}", cell=bad, time=t)


def step_relaxation(U, sys: System1D, grid: Grid1D, dt, cfl=DEFAULT_CFL, t=0.0):
    """One IMEX step of the relaxation system; returns the new state array.

    Explicit Rusanov fluxes + centered u_x coupling, then the exact
    implicit relaxation solve w <- w / (1 + dt/(rho eps mu_tilde)).
    Raises CflViolationError if dt exceeds cfl * dx / lambda_max.
    """
    U = np.asarray(U, dtype=float)
    _check_positive(U[0], t)
    rad = sys.spectral_radius(U)
    dt_max = cfl * grid.dx / float(np.max(rad))
    if dt > dt_max * (1.0 + 1e-12):
        raise CflViolationError(
            f"dt={dt:.3e} exceeds stable step {dt_max:.3e} (cfl={cfl})")

    Ue = _extend(U, grid.bc)
    rad_e = _extend(rad[None, :], grid.bc)[0]
    f = sys.flux(Ue)
    a_face = np.maximum(rad_e[:-1], rad_e[1:])
    F = 0.5 * (f[:, :-1] + f[:, 1:]) - 0.5 * a_face * (Ue[:, 1:] - Ue[:, :-1])
    Un = U - dt / grid.dx * (F[:, 1:] - F[:, :-1])

    # centered non-conservative coupling u_x / eps in the w-balance
    u_e = Ue[1] / Ue[0]
    ux = (u_e[2:] - u_e[:-2]) / (2.0 * grid.dx)
    Un[2] -= dt * ux / sys.eps

    _check_positive(Un[0], t)
    Un[2] *= sys.source_halflife_factor(Un[0], dt)
    return Un


def run_relaxation(U0, sys: System1D, grid: Grid1D, t_final, cfl=DEFAULT_CFL,
                   snapshot_times=()) -> Trajectory:
    """Integrate the relaxation system to t_final with adaptive CFL steps.

    Records the total energy sum(E) dx after every step and snapshots at
    the requested times (plus t=0 and t_final).
    """
    U = np.array(U0, dtype=float, copy=True)
    if U.shape != (3, grid.n):
        raise DomainError(f"initial data must have shape (3, {grid.n})")
    traj = Trajectory(grid)
    traj.snapshot(0.0, U)
    traj.energy_times.append(0.0)
    traj.energies.append(float(np.sum(sys.energy_density(U)) * grid.dx))
    pending = sorted(float(s) for s in snapshot_times if 0.0 < s < t_final)
    t = 0.0
    while t < t_final - 1e-14:
        rad = float(np.max(sys.spectral_radius(U)))
        dt = min(cfl * grid.dx / rad, t_final - t)
        if pending and t + dt > pending[0] - 1e-14:
            dt = pending[0] - t
        try:
            U = step_relaxation(U, sys, grid, dt, cfl=cfl, t=t)
        except VacuumError:
            traj.failed = True
            raise
        t += dt
        traj.energy_times.append(t)
        traj.energies.append(float(np.sum(sys.energy_density(U)) * grid.dx))
        if pending and abs(t - pending[0]) < 1e-12:
            traj.snapshot(t, U)
            pending.pop(0)
    traj.snapshot(t, U)
    return traj


# ---------------------------------------------------------------------------
# Navier-Stokes / Euler reference solver
# ---------------------------------------------------------------------------

def _euler_flux(U, eos):
    rho, m = U
    return np.stack([m, m ** 2 / rho + eos.p_rho(rho)])


def _euler_speed(U, eos):
    rho, m = U
    return np.abs(m / rho) + np.sqrt(eos.dp_drho(rho))


def run_navier_stokes(U0, eos, mu_tilde, grid: Grid1D, t_final, cfl=DEFAULT_CFL,
                      snapshot_times=()) -> Trajectory:
    """Reference (rho, rho u) solver; mu_tilde = 0 gives the inviscid run.

    Rusanov convective fluxes plus explicit central (mu_tilde u_x)_x with
    the diffusive restriction dt <= 0.25 dx^2 / mu_tilde.
    """
    if mu_tilde < 0.0:
        raise DomainError("mu_tilde must be nonnegative")
    U = np.array(U0, dtype=float, copy=True)
    if U.shape != (2, grid.n):
        raise DomainError(f"initial data must have shape (2, {grid.n})")
    traj = Trajectory(grid)
    traj.snapshot(0.0, U)

    def energy(Us):
        rho, m = Us
        return float(np.sum(rho * eos.e(1.0 / rho) + 0.5 * m ** 2 / rho) * grid.dx)

    traj.energy_times.append(0.0)
    traj.energies.append(energy(U))
    pending = sorted(float(s) for s in snapshot_times if 0.0 < s < t_final)
    t = 0.0
    dx = grid.dx
    while t < t_final - 1e-14:
        _check_positive(U[0], t)
        smax = float(np.max(_euler_speed(U, eos)))
        dt = cfl * dx / smax
        if mu_tilde > 0.0:
            dt = min(dt, 0.25 * dx ** 2 / mu_tilde)
        dt = min(dt, t_final - t)
        if pending and t + dt > pending[0] - 1e-14:
            dt = pending[0] - t

        Ue = _extend(U, grid.bc)
        f = _euler_flux(Ue, eos)
        s = _euler_speed(Ue, eos)
        a_face = np.maximum(s[:-1], s[1:])
        F = 0.5 * (f[:, :-1] + f[:, 1:]) - 0.5 * a_face * (Ue[:, 1:] - Ue[:, :-1])
        Un = U - dt / dx * (F[:, 1:] - F[:, :-1])
        if mu_tilde > 0.0:
            u_e = Ue[1] / Ue[0]
            visc = mu_tilde * (u_e[2:] - 2.0 * u_e[1:-1] + u_e[:-2]) / dx ** 2
            Un[1] += dt * visc
        if not np.all(np.isfinite(Un)):
            bad = int(np.argmin(np.isfinite(Un[0] * Un[1])))
            raise VacuumError(f"NaN detected in cell {bad} at t={t:.6g}", cell=bad, time=t)
        U = Un
        t += dt
        traj.energy_times.append(t)
        traj.energies.append(energy(U))
        if pending and abs(t - pending[0]) < 1e-12:
            traj.snapshot(t, U)
            pending.pop(0)
    _check_positive(U[0], t)
    traj.snapshot(t, U)
    return traj


# ---------------------------------------------------------------------------
# relaxation-limit study and energy audit
# ---------------------------------------------------------------------------

@dataclass
class LimitStudyRow:
    eps: float
    l2_error: float
    energy_ok: bool
    failed: bool = False


@dataclass
class LimitStudyResult:
    rows: list
    ns_trajectory: Trajectory
    trajectories: dict

    def errors(self):
        return [r.l2_error for r in self.rows if not r.failed]


def prepared_initial_state(rho0, u0, grid: Grid1D, mu_tilde, du0=None):
    """(rho, m, w) cell data with the slaved stress sigma = -mu_tilde u_x.

    ``du0`` is the analytic derivative of u0 when available, else a
    spectral-free central difference of the sampled velocity is used.
    """
    x = grid.x
    rho = np.asarray(rho0(x), dtype=float)
    u = np.asarray(u0(x), dtype=float)
    if du0 is not None:
        ux = np.asarray(du0(x), dtype=float)
    else:
        ux = (np.roll(u, -1) - np.roll(u, 1)) / (2.0 * grid.dx)
    sigma = -mu_tilde * ux
    return np.stack([rho, rho * u, rho * sigma])


def relaxation_limit_study(rho0, u0, eos, mu, nu, grid: Grid1D, t_final, eps_list,
                           cfl=DEFAULT_CFL, du0=None) -> LimitStudyResult:
    """L2 distance of (rho_eps, u_eps) from the Navier-Stokes run, per eps.

    Initial stress is prepared on the slaved manifold sigma = -mu_tilde u_x
    so that the eps -> 0 momentum flux reproduces the viscous stress.  A
    failed member run leaves a marked row instead of aborting the sweep.
    """
    if any(e <= 0.0 for e in eps_list):
        raise DomainError("every eps must be positive")
    mu_tilde = (2.0 / 3.0) * mu + nu
    U_ns0 = prepared_initial_state(rho0, u0, grid, mu_tilde, du0)[:2]
    ns = run_navier_stokes(U_ns0, eos, mu_tilde, grid, t_final, cfl=cfl)
    rho_ns, m_ns = ns.final
    u_ns = m_ns / rho_ns

    rows, trajs = [], {}
    for eps in eps_list:
        sys = System1D(eos=eos, eps=float(eps), mu_tilde=mu_tilde)
        U0 = prepared_initial_state(rho0, u0, grid, mu_tilde, du0)
        try:
            traj = run_relaxation(U0, sys, grid, t_final, cfl=cfl)
        except VacuumError:
            rows.append(LimitStudyRow(float(eps), np.nan, False, failed=True))
            continue
        rho_e, m_e, _ = traj.final
        u_e = m_e / rho_e
        err = float(np.sqrt(np.sum((rho_e - rho_ns) ** 2 + (u_e - u_ns) ** 2) * grid.dx))
        audit = discrete_energy_audit(traj)
        rows.append(LimitStudyRow(float(eps), err, audit.ok))
        trajs[float(eps)] = traj
    return LimitStudyResult(rows, ns, trajs)


@dataclass
class EnergyAudit:
    ok: bool
    first_bad_step: int | None
    max_increase: float
    energies: np.ndarray


def discrete_energy_audit(traj: Trajectory, tol_factor=1e-10) -> EnergyAudit:
    """Verify the per-step monotone decay of the discrete total energy.

    Periodic boundaries assumed (boundary flux cancels).  An increase of
    more than tol_factor * E(0) in any single step fails the audit with
    the first offending step.
    """
    if traj.grid.bc != "periodic":
        raise DomainError("energy audit requires periodic boundaries")
    E = np.asarray(traj.energies)
    dE = np.diff(E)
    tol = tol_factor * abs(E[0])
    bad = np.nonzero(dE > tol)[0]
    return EnergyAudit(bad.size == 0, int(bad[0]) + 1 if bad.size else None,
                       float(np.max(dE)) if dE.size else 0.0, E)
