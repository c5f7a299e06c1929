"""Experiment driver: every study is a subcommand reading a JSON config.

Flags only select the configuration file and the output directory, so an
experiment is fully declared by its config.  Each run writes its data
files (CSV), a metadata JSON embedding the resolved config, its SHA-256
hash and residual summaries, and a human-readable verdict summary.  Exit
status is 0 iff all audits pass.  Randomized sweeps draw from a
counter-based Philox generator keyed by the config seed, so identical
config + seed reproduce identical CSV payloads bitwise.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, evans, godunov, lorentz, model, profiles, sim1d, thermo
from .errors import ConfigError, RelaxShockError

EXPERIMENTS = ("simulate", "limit-study", "profile", "profile-limit",
               "evans", "winding", "evans-limit", "check-model", "check-godunov")


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def _field(cfg, path, default=None, required=False):
    node = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError("missing required field", field=path)
            return default
        node = node[part]
    return node


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    kind = _field(cfg, "experiment", required=True)
    if kind not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {kind!r}", field="experiment")
    return cfg


def make_eos(cfg):
    spec = _field(cfg, "eos", default={"family": "gamma-law"})
    family = spec.get("family", "gamma-law")
    if family == "gamma-law":
        return thermo.BarotropicEos(A=spec.get("A", 1.0), gamma=spec.get("gamma", 2.0))
    if family == "exponential":
        return thermo.GodunovEos(c0=spec.get("c0", 1.0), n=spec.get("n", 4.0))
    raise ConfigError(f"unknown EOS family {family!r}", field="eos.family")


def make_params(cfg):
    p = _field(cfg, "params", default={})
    eps = p.get("eps", 0.1)
    if eps <= 0.0:
        raise ConfigError("eps must be positive", field="params.eps")
    try:
        return model.ModelParams(eps=eps, mu=p.get("mu", 1.0), nu=p.get("nu", 1.0),
                                 d=p.get("d", 3))
    except RelaxShockError as exc:
        raise ConfigError(str(exc), field="params")


def make_grid(cfg):
    g = _field(cfg, "grid", default={})
    try:
        return sim1d.Grid1D(n=g.get("n", 200), a=g.get("a", 0.0), b=g.get("b", 1.0),
                            bc=g.get("bc", "periodic"))
    except RelaxShockError as exc:
        raise ConfigError(str(exc), field="grid")


def _eps_list(cfg, default=(0.1, 0.05, 0.025)):
    eps_list = _field(cfg, "eps_list", default=list(default))
    if not eps_list or any(e <= 0.0 for e in eps_list):
        raise ConfigError("eps_list must be nonempty with positive entries", field="eps_list")
    return [float(e) for e in eps_list]


def _rng(cfg):
    seed = int(_field(cfg, "seed", default=0))
    return np.random.Generator(np.random.Philox(key=seed))


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------

class RunWriter:
    def __init__(self, outdir, cfg):
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.files = []
        self.summaries = {}
        self.verdicts = {}

    def csv(self, name, header, rows):
        path = self.outdir / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
        self.files.append(name)
        return path

    def verdict(self, name, ok, detail=""):
        self.verdicts[name] = {"pass": bool(ok), "detail": detail}

    def summary(self, name, value):
        self.summaries[name] = value

    def finish(self):
        ok = all(v["pass"] for v in self.verdicts.values()) if self.verdicts else True
        blob = json.dumps(self.cfg, sort_keys=True).encode()
        meta = {
            "tool": "relaxshock",
            "version": __version__,
            "config": self.cfg,
            "config_sha256": hashlib.sha256(blob).hexdigest(),
            "files": sorted(self.files),
            "summaries": self.summaries,
            "verdicts": self.verdicts,
            "all_pass": ok,
        }
        with open(self.outdir / "metadata.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
        lines = [f"relaxshock {self.cfg.get('experiment')}: "
                 f"{'PASS' if ok else 'FAIL'}"]
        for name, v in sorted(self.verdicts.items()):
            lines.append(f"  [{'ok' if v['pass'] else 'FAIL'}] {name} {v['detail']}".rstrip())
        text = "\n".join(lines) + "\n"
        (self.outdir / "summary.txt").write_text(text)
        click.echo(text, nl=False)
        return ok


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _initial_waves(cfg):
    ic = _field(cfg, "initial", default={})
    amp_r = ic.get("rho_amplitude", 0.1)
    amp_u = ic.get("u_amplitude", 0.1)
    k = 2.0 * np.pi * ic.get("wavenumber", 1.0)
    phase = ic.get("phase", 0.7)
    rho0 = lambda x: 1.0 + amp_r * np.sin(k * x)
    u0 = lambda x: amp_u * np.sin(k * x + phase)
    du0 = lambda x: amp_u * k * np.cos(k * x + phase)
    return rho0, u0, du0


def run_simulate(cfg, writer):
    eos, params, grid = make_eos(cfg), make_params(cfg), make_grid(cfg)
    t_final = _field(cfg, "t_final", default=0.2)
    sys1d = model.reduce_1d(params, eos)
    rho0, u0, du0 = _initial_waves(cfg)
    U0 = sim1d.prepared_initial_state(rho0, u0, grid, sys1d.mu_tilde, du0)
    traj = sim1d.run_relaxation(U0, sys1d, grid, t_final)
    rows = []
    for t, U in zip(traj.times, traj.states):
        for j, x in enumerate(grid.x):
            rows.append((float(t), float(x), float(U[0, j]),
                         float(U[1, j] / U[0, j]), float(U[2, j] / U[0, j])))
    writer.csv("trajectory.csv", ["t", "x", "rho", "u", "sigma"], rows)
    writer.csv("energy.csv", ["t", "total_energy"],
               list(zip(map(float, traj.energy_times), map(float, traj.energies))))
    if grid.bc == "periodic":
        audit = sim1d.discrete_energy_audit(traj)
        writer.verdict("energy_dissipation", audit.ok,
                       f"max per-step increase {audit.max_increase:.3e}")
    writer.summary("system", sys1d.to_json())


def run_limit_study(cfg, writer):
    eos, params, grid = make_eos(cfg), make_params(cfg), make_grid(cfg)
    t_final = _field(cfg, "t_final", default=0.2)
    eps_list = _eps_list(cfg)
    rho0, u0, du0 = _initial_waves(cfg)
    res = sim1d.relaxation_limit_study(rho0, u0, eos, params.mu, params.nu, grid,
                                       t_final, eps_list, du0=du0)
    rows = [(r.eps, r.l2_error, int(r.energy_ok), int(r.failed)) for r in res.rows]
    writer.csv("limit_table.csv", ["epsilon", "l2_error", "energy_ok", "failed"], rows)
    errs = res.errors()
    decreasing = all(a > b for a, b in zip(errs, errs[1:]))
    writer.verdict("error_decreases_with_eps", decreasing,
                   " > ".join(f"{e:.3e}" for e in errs))
    writer.verdict("energy_audits", all(r.energy_ok for r in res.rows if not r.failed))


def _setup_from_cfg(cfg):
    eos = make_eos(cfg)
    shock = _field(cfg, "shock", default={})
    return profiles.rankine_hugoniot(eos, shock.get("rho_minus", 1.0),
                                     shock.get("u_minus", 2.0))


def run_profile(cfg, writer):
    setup = _setup_from_cfg(cfg)
    mu_tilde = _field(cfg, "mu_tilde", default=1.0)
    eps = _field(cfg, "eps", default=0.0)
    prof = (profiles.ns_profile(setup, mu_tilde) if eps == 0.0
            else profiles.relaxation_profile(setup, mu_tilde, eps))
    writer.csv("profile.csv", ["xi", "R", "U", "Sigma"],
               list(zip(map(float, prof.xi), map(float, prof.R),
                        map(float, prof.U), map(float, prof.Sigma))))
    writer.summary("endpoints", {"u_minus": setup.u_minus, "u_plus": setup.u_plus,
                                 "rho_plus": setup.rho_plus, "m": setup.m})
    writer.summary("endpoint_residual", list(prof.endpoint_residual))
    writer.summary("momentum_integral_drift", prof.momentum_integral_drift())
    writer.verdict("endpoint_residual", max(prof.endpoint_residual) < 1e-6,
                   f"{max(prof.endpoint_residual):.2e}")


def run_profile_limit(cfg, writer):
    setup = _setup_from_cfg(cfg)
    mu_tilde = _field(cfg, "mu_tilde", default=1.0)
    eps_list = _eps_list(cfg)
    rows = profiles.profile_limit_study(setup, mu_tilde, eps_list)
    writer.csv("profile_limit.csv", ["epsilon", "sup_slaving_residual", "sup_state_diff"],
               [(r.eps, r.sup_slaving_residual, r.sup_state_diff) for r in rows])
    res = [r.sup_slaving_residual for r in rows]
    ratios = [a / b for a, b in zip(res, res[1:])]
    writer.verdict("slaving_residual_first_order",
                   all(1.5 <= r <= 2.5 for r in ratios),
                   "ratios " + ", ".join(f"{r:.2f}" for r in ratios))


def _contour_from_cfg(cfg):
    c = _field(cfg, "contour", default={})
    kind = c.get("kind", "half_disc")
    if kind == "half_disc":
        return evans.half_disc_contour(c.get("radius", 5.0), c.get("delta0", 0.05),
                                       n_init=c.get("n_init", 192))
    if kind == "circle":
        return evans.circle_contour(c.get("radius", 0.25), c.get("center", 0.0),
                                    n_init=c.get("n_init", 96))
    raise ConfigError(f"unknown contour kind {kind!r}", field="contour.kind")


def run_evans(cfg, writer):
    setup = _setup_from_cfg(cfg)
    mu_tilde = _field(cfg, "mu_tilde", default=1.0)
    eps = _field(cfg, "eps", default=0.0)
    contour = _contour_from_cfg(cfg)
    prof = (profiles.ns_profile(setup, mu_tilde, resid_tol=1e-9) if eps == 0.0
            else profiles.relaxation_profile(setup, mu_tilde, eps, resid_tol=1e-9))
    prob = evans.EvansProblem(prof)
    ev = evans.EvansEvaluator(prob, contour.point(0.0).real)
    ts = np.linspace(0.0, 1.0, contour.n_init, endpoint=False)
    lams = contour.point(ts)
    logd = ev.logd(lams)
    d = np.exp(logd - np.max(logd.real))
    writer.csv("evans_samples.csv", ["re_lambda", "im_lambda", "re_D", "im_D"],
               [(float(l.real), float(l.imag), float(v.real), float(v.imag))
                for l, v in zip(lams, d)])
    sym = abs(np.conj(d[1]) - d[-1]) / max(abs(d[1]), 1e-300)
    writer.verdict("conjugation_symmetry", sym < 1e-6, f"defect {sym:.2e}")


def run_winding(cfg, writer):
    setup = _setup_from_cfg(cfg)
    mu_tilde = _field(cfg, "mu_tilde", default=1.0)
    eps = _field(cfg, "eps", default=0.0)
    prof = (profiles.ns_profile(setup, mu_tilde, resid_tol=1e-9) if eps == 0.0
            else profiles.relaxation_profile(setup, mu_tilde, eps, resid_tol=1e-9))
    prob = evans.EvansProblem(prof)
    C = _field(cfg, "contour.radius", default=5.0)
    r0 = _field(cfg, "small_radius", default=0.05 * C)
    w_big = evans.winding_number(prob, evans.half_disc_contour(C, _field(cfg, "contour.delta0", default=0.05)))
    w_small = evans.winding_number(prob, evans.circle_contour(r0))
    d0, dmax = evans.evans_value_at_zero(prob, radius=r0)
    payload = {
        "half_disc": {"winding": w_big.winding, "raw": w_big.raw, "samples": w_big.n_samples},
        "small_circle": {"winding": w_small.winding, "raw": w_small.raw,
                         "samples": w_small.n_samples},
        "zero_value_ratio": d0 / dmax,
    }
    with open(writer.outdir / "winding.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    writer.files.append("winding.json")
    writer.csv("winding_samples.csv", ["re_lambda", "im_lambda", "re_D", "im_D"],
               [(float(l.real), float(l.imag), float(v.real), float(v.imag))
                for l, v in zip(w_big.lambdas, w_big.d_values)])
    writer.verdict("half_disc_winding_zero", w_big.winding == 0, f"raw {w_big.raw:.3f}")
    writer.verdict("small_circle_winding_one", w_small.winding == 1, f"raw {w_small.raw:.3f}")
    writer.verdict("translation_zero", d0 / dmax < 1e-6, f"|D(0)|/max = {d0 / dmax:.2e}")


def run_evans_limit(cfg, writer):
    setup = _setup_from_cfg(cfg)
    mu_tilde = _field(cfg, "mu_tilde", default=1.0)
    eps_list = _eps_list(cfg)
    contour = _contour_from_cfg(cfg)
    rows = evans.evans_convergence(setup, mu_tilde, eps_list, contour=contour,
                                   n_samples=_field(cfg, "n_samples", default=128))
    writer.csv("evans_limit.csv", ["epsilon", "sup_deviation"],
               [(r.eps, r.sup_deviation) for r in rows])
    devs = [r.sup_deviation for r in rows if r.eps > 0.0]
    writer.verdict("deviation_decreases_with_eps",
                   all(a > b for a, b in zip(devs, devs[1:])),
                   " > ".join(f"{v:.3e}" for v in devs))


def run_check_model(cfg, writer):
    eos, params = make_eos(cfg), make_params(cfg)
    rng = _rng(cfg)
    rows = []
    c = model.c_tensor(3)
    dev = np.array([[1.0, 0.3, -0.2], [0.3, -1.0, 0.1], [-0.2, 0.1, 0.0]])
    contr = model.c_contract(dev, c)
    rows.append(("c_tensor_tracefree", float(np.max(np.abs(contr - dev)))))
    eye_contr = model.c_contract(np.eye(3), c)
    rows.append(("c_tensor_trace_annihilation", float(np.max(np.abs(eye_contr)))))

    worst_shift, worst_hess, worst_diss = 0.0, 0.0, 0.0
    pd_all = True
    for _ in range(_field(cfg, "n_random", default=25)):
        rho = rng.uniform(0.5, 2.0)
        u = rng.normal(size=3) * 0.5
        a = rng.normal(size=(3, 3)) * 0.3
        sigma = 0.5 * (a + a.T)
        tau = rng.normal() * 0.3
        w = model.PrimitiveState(rho, u, sigma, tau)
        U = model.ConservedVec.from_primitive(w)
        boost = rng.normal(size=3)
        wb = model.PrimitiveState(rho, u + boost, sigma, tau)
        Ub = model.ConservedVec.from_primitive(wb)
        for j in range(3):
            f0 = model.flux(U, eos, params, j)
            fb = model.flux(Ub, eos, params, j)
            dm = (wb.rho * wb.u[j] * wb.u - w.rho * w.u[j] * w.u)
            worst_shift = max(worst_shift, float(np.max(np.abs(
                fb.rho - f0.rho - rho * boost[j]))))
            worst_shift = max(worst_shift, float(np.max(np.abs(fb.m - f0.m - dm))))
        rep = model.energy_hessian(U, eos)
        pd_all &= rep.positive_definite
        fd = model.fd_hessian(lambda z: model.energy_of_conserved(z, 3, eos), U.flatten())
        worst_hess = max(worst_hess, float(np.max(np.abs(fd - rep.matrix)))
                         / max(1.0, float(np.max(np.abs(rep.matrix)))))
        src = model.source(U, params)
        lhs = model.dissipation_rate(w, params)
        rhs = float(np.tensordot(w.sigma, src.S) + w.tau * src.T)
        worst_diss = max(worst_diss, abs(lhs - rhs))
    rows += [("galilean_shift_defect", worst_shift),
             ("hessian_fd_defect", worst_hess),
             ("dissipation_source_pairing", worst_diss)]
    writer.csv("model_checks.csv", ["check", "value"], rows)
    writer.verdict("c_tensor", rows[0][1] == 0.0 and rows[1][1] == 0.0)
    writer.verdict("galilean_shift", worst_shift < 1e-12, f"{worst_shift:.2e}")
    writer.verdict("hessian_fd", worst_hess < 1e-6, f"{worst_hess:.2e}")
    writer.verdict("hessian_positive_definite", pd_all)
    writer.verdict("dissipation_pairing", worst_diss < 1e-12, f"{worst_diss:.2e}")


def run_check_godunov(cfg, writer):
    geos = thermo.GodunovEos(c0=_field(cfg, "eos.c0", default=1.0),
                             n=_field(cfg, "eos.n", default=4.0))
    rng = _rng(cfg)
    charts = godunov.build_charts(geos)
    rows = []
    worst = {name: 0.0 for name in charts}
    for _ in range(_field(cfg, "n_random", default=20)):
        for name, chart in charts.items():
            Y = godunov.equilibrium_state(chart, psi_t=rng.uniform(-0.3, 0.3),
                                          ut=rng.normal(size=3) * 0.2,
                                          tht=rng.uniform(0.8, 1.2))
            if chart.nvars > 5:
                Y[5:] = rng.normal(size=chart.nvars - 5) * 0.1
            worst[name] = max(worst[name], godunov.protopotential_consistency(chart, Y))
    for name, w in sorted(worst.items()):
        rows.append((f"protopotential_{name}", w))
        writer.verdict(f"protopotential_{name}", w < 1e-5, f"{w:.2e}")
    hyp = godunov.hyperbolicity_check(charts["euler"],
                                      godunov.equilibrium_state(charts["euler"]))
    rows.append(("euler_hessian_definite", float(bool(hyp.definite))))
    writer.verdict("euler_hessian_definite", bool(hyp.definite))

    ps = lorentz.projectors(np.array([1.0, 0.0, 0.0, 0.0]))
    ok = ps.verify(rng=np.random.Generator(np.random.Philox(key=1)))
    rows.append(("projector_identities", float(ok)))
    writer.verdict("projector_identities", ok)
    writer.csv("godunov_checks.csv", ["check", "value"], rows)


RUNNERS = {
    "simulate": run_simulate,
    "limit-study": run_limit_study,
    "profile": run_profile,
    "profile-limit": run_profile_limit,
    "evans": run_evans,
    "winding": run_winding,
    "evans-limit": run_evans_limit,
    "check-model": run_check_model,
    "check-godunov": run_check_godunov,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

@click.group()
@click.version_option(__version__)
def main():
    """Relaxation-model experiment driver."""


def _register(kind):
    @main.command(name=kind)
    @click.option("--config", "config_path", required=True,
                  type=click.Path(exists=True, dir_okay=False),
                  help="JSON experiment configuration.")
    @click.option("--out", "outdir", required=True, type=click.Path(file_okay=False),
                  help="Output directory for CSV/JSON artifacts.")
    def _cmd(config_path, outdir, _kind=kind):
        try:
            cfg = load_config(config_path)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)
        if cfg.get("experiment") != _kind:
            click.echo(f"config error: experiment: config declares "
                       f"{cfg.get('experiment')!r}, subcommand is {_kind!r}", err=True)
            sys.exit(2)
        writer = RunWriter(outdir, cfg)
        try:
            RUNNERS[_kind](cfg, writer)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)
        except RelaxShockError as exc:
            (writer.outdir / "failure.json").write_text(
                json.dumps({"error": type(exc).__name__, "message": str(exc)}, indent=2))
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(1)
        sys.exit(0 if writer.finish() else 1)

    _cmd.__name__ = f"cmd_{kind.replace('-', '_')}"
    return _cmd


for _kind in EXPERIMENTS:
    _register(_kind)
