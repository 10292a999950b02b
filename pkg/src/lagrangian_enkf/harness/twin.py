"""Twin experiments: synthetic truth, seeded ensemble, forecast/analysis loop, CSV output."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from threadpoolctl import threadpool_limits

from ..advection_diffusion import (forecast_grid_1d, forecast_particles_1d, ground_truth_1d,
                                   observe_points_1d)
from ..enkf import ObservationSpec
from ..filters import FilterConfig, LagrangianEnsemble, assimilate
from ..kernels import RedistributionKernel, SmoothingKernel
from ..particles import Domain, ParticleSet, eval_field, init_from_function
from ..remeshing import UniformGrid, grid_interp_field, lattice_positions
from ..vortex import (M4_2D, DipoleParams, VicSolver, VortexState, box_domain, forecast_2d,
                      lamb_chaplygin_init, member_errors_omega, observation_points,
                      observe_velocity, vorticity_on)
from .config import Experiment1DConfig, Experiment2DConfig
from .metrics import compute_rrmse, member_rel_errors, rrmse_param
from .output import member_cols, write_rows
from .streams import RngStreams

log = logging.getLogger(__name__)

THREADS_ENV = "LAGENKF_THREADS"


class ExperimentError(RuntimeError):
    pass


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "1")
        try:
            threads = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV}={raw!r} is not an integer") from None
    if threads < 1:
        raise ValueError("thread count must be at least 1")
    return threads


def _map_members(fn: Callable, args: list, threads: int, step: int) -> list:
    """Apply ``fn`` to every member; results keep member order whatever the thread count."""

    def run(i):
        try:
            return fn(*args[i])
        except Exception as exc:
            raise ExperimentError(f"assimilation {step}, member {i}: {exc}") from exc

    if threads == 1:
        return [run(i) for i in range(len(args))]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(run, range(len(args))))


@dataclass
class TwinResult:
    metrics: list[dict]
    params: list[dict]
    members: list
    truth: object
    out_dir: Path | None = None
    extra: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.metrics])


def _write(result: TwinResult, out_dir, snapshot: Callable) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, rows in (("metrics.csv", result.metrics), ("params_trace.csv", result.params)):
        header = list(rows[0])
        write_rows(out / name, header, [[r[h] for h in header] for r in rows])
    snap = out / "snapshots"
    snap.mkdir(exist_ok=True)
    snapshot(snap)
    result.out_dir = out


# ---------------------------------------------------------------- 1D testbed


class Adv1DSetup:
    """Discretisation shared by every member of the 1D testbed."""

    def __init__(self, cfg: Experiment1DConfig):
        if cfg.n_particles % 2:
            raise ValueError("particle count must be even (two particles per remesh cell)")
        self.cfg = cfg
        self.domain = Domain.periodic_1d()
        self.dp = cfg.dp
        self.kernel = SmoothingKernel(cfg.eps_ratio * self.dp, 1, period=2 * np.pi)
        self.remesh_grid = UniformGrid.periodic_1d(cfg.n_particles // 2)
        self.fd_grid = UniformGrid.periodic_1d(cfg.n_grid)
        self.w = RedistributionKernel("m4prime", 1)
        self.xq = np.arange(cfg.n_quad) * 2 * np.pi / cfg.n_quad
        self.hq = 2 * np.pi / cfg.n_quad
        self.locations = cfg.locations

    def truth(self, x, t):
        c = self.cfg
        return ground_truth_1d(x, t, c.x0, np.sqrt(c.sigma0_sq), c.v, c.D)

    def initial_member(self, x0, sigma0):
        f = lambda x: ground_truth_1d(x, 0.0, x0, sigma0, 0.0, 1.0)
        if self.cfg.filter == "grid":
            return self.fd_grid.with_values(f(self.fd_grid.axis(0)))
        pos = lattice_positions(self.remesh_grid)
        return init_from_function(f, pos, self.dp, self.kernel, self.domain,
                                  eps_cut=self.cfg.eps_cut)

    def values(self, member, x) -> np.ndarray:
        if isinstance(member, ParticleSet):
            return eval_field(member, x)
        return grid_interp_field(member, self.w, x)

    def observe(self, member) -> np.ndarray:
        return observe_points_1d(member, self.locations, self.w)

    def forecast(self, member, v, D, duration):
        h = self.fd_grid.spacing
        if isinstance(member, ParticleSet):
            return forecast_particles_1d(member, v, D, duration, self.cfg.dt_max, h)
        return forecast_grid_1d(member, v, D, duration, self.cfg.dt_max)

    def filter_config(self, rng) -> FilterConfig:
        c = self.cfg
        return FilterConfig(kind=c.filter, construction=c.construction, eps_cut=c.eps_cut,
                            grid=self.remesh_grid, dp=self.dp, redistribution=self.w,
                            observe=self.observe, rng=rng)


def generate_ensemble_1d(cfg: Experiment1DConfig, streams: RngStreams, setup: Adv1DSetup | None = None):
    """Initial members and an ``(N, 2)`` array of ``(v, D)``; member ``i`` draws from its own stream."""
    setup = setup or Adv1DSetup(cfg)
    members, params, draws = [], [], []
    for i in range(cfg.n_members):
        g = streams.get("ensemble", i)
        x0 = cfg.x0_dist.sample(g)
        sigma0 = abs(cfg.sigma0_dist.sample(g))
        v = cfg.v_dist.sample(g)
        D = max(cfg.D_dist.sample(g), cfg.D_min)
        members.append(setup.initial_member(x0, sigma0))
        params.append((v, D))
        draws.append({"x0": x0, "sigma0": sigma0, "v": v, "D": D})
    return members, np.array(params), draws


def _count(member) -> int:
    return len(member) if isinstance(member, ParticleSet) else member.size


def run_1d(cfg: Experiment1DConfig, out_dir=None, threads: int | None = None) -> TwinResult:
    threads = resolve_threads(threads)
    setup = Adv1DSetup(cfg)
    streams = RngStreams(cfg.seed)
    members, params, draws = generate_ensemble_1d(cfg, streams, setup)
    ens = LagrangianEnsemble(members, params, ("v", "D"))
    N = cfg.n_members
    dt_a = cfg.t_final / cfg.n_assim if cfg.n_assim else cfg.t_final

    def record(step, t, prior_err):
        truth = setup.truth(setup.xq, t)
        vals = np.stack([setup.values(m, setup.xq) for m in ens.members])
        errs = member_rel_errors(vals, truth, setup.hq)
        row = {"step": step, "time": t,
               "rrmse_forecast": prior_err if prior_err is not None else compute_rrmse(vals, truth, setup.hq),
               "rrmse": compute_rrmse(vals, truth, setup.hq),
               "rrmse_v": rrmse_param(ens.params[:, 0], cfg.v),
               "rrmse_D": rrmse_param(ens.params[:, 1], cfg.D)}
        row.update(zip(member_cols("err", N), errs))
        row.update(zip(member_cols("np", N), (_count(m) for m in ens.members)))
        metrics.append(row)
        p = {"step": step, "time": t}
        p.update(zip(member_cols("v", N), ens.params[:, 0]))
        p.update(zip(member_cols("D", N), ens.params[:, 1]))
        params_rows.append(p)

    metrics, params_rows = [], []
    initial = list(ens.members)
    record(0, 0.0, None)
    for k in range(1, cfg.n_assim + 1):
        t = k * dt_a
        args = [(m, *ens.params[i], dt_a) for i, m in enumerate(ens.members)]
        ens = ens.replace_members(_map_members(setup.forecast, args, threads, k))
        truth_q = setup.truth(setup.xq, t)
        vals = np.stack([setup.values(m, setup.xq) for m in ens.members])
        prior = compute_rrmse(vals, truth_q, setup.hq)

        noise = streams.get("observation", 0, k).standard_normal(len(setup.locations))
        y = setup.truth(setup.locations, t) + np.sqrt(cfg.obs_var) * noise
        obs = ObservationSpec(y, cfg.obs_var)
        fcfg = setup.filter_config(streams.members("perturbation", N, k))
        try:
            with threadpool_limits(1):
                ens = assimilate(ens, obs, fcfg)
        except Exception as exc:
            raise ExperimentError(f"assimilation {k}: {exc}") from exc
        ens.params[:, 1] = np.maximum(ens.params[:, 1], cfg.D_min)
        record(k, t, prior)

    t_end = cfg.n_assim * dt_a if cfg.n_assim else 0.0
    result = TwinResult(metrics, params_rows, ens.members, setup.truth(setup.xq, t_end),
                        extra={"draws": draws, "initial": initial, "setup": setup})
    if out_dir is not None:
        def snapshot(snap):
            write_rows(snap / "truth_final.csv", ["x", "u"], zip(setup.xq, result.truth))
            for tag, mems in (("initial", initial), ("final", ens.members)):
                for i, m in enumerate(mems):
                    m.to_csv(snap / f"{tag}_member_{i:02d}.csv")
        _write(result, out_dir, snapshot)
    return result


# ---------------------------------------------------------------- 2D testbed


class Vortex2DSetup:
    def __init__(self, cfg: Experiment2DConfig):
        self.cfg = cfg
        self.domain = box_domain()
        self.dp = cfg.dp
        self.kernel = SmoothingKernel(cfg.eps_ratio * self.dp, 2)
        self.solver = VicSolver(cfg.n_grid, self.domain)
        self.points = observation_points(cfg.n_obs_per_axis, self.domain)
        # e_omega quadrature on the truth's VIC grid
        self.quad = VicSolver(cfg.n_grid * cfg.truth_refinement, self.domain).grid

    def observe(self, member) -> np.ndarray:
        return observe_velocity(member, self.points, self.solver)

    def forecast(self, state: VortexState, n_steps: int) -> VortexState:
        c = self.cfg
        return forecast_2d(state, n_steps, c.dt, self.solver, self.dp, c.eps_omega, c.n_remesh)

    def filter_config(self, rng) -> FilterConfig:
        c = self.cfg
        return FilterConfig(kind=c.filter, construction=c.construction, eps_cut=c.eps_omega,
                            grid=self.solver.grid, dp=self.dp, redistribution=M4_2D,
                            observe=self.observe, rng=rng)


_TRUTH_CACHE: dict = {}


def truth_trajectory_2d(cfg: Experiment2DConfig) -> list[VortexState]:
    """Reference states at every observation time, from a run at ``truth_refinement`` x resolution.

    Cached per process because paired experiments share the same truth.
    """
    r = cfg.truth_refinement
    key = (cfg.U, cfg.R, cfg.alpha, cfg.center, cfg.nu, cfg.n_grid, r, cfg.dt, cfg.eps_ratio,
           cfg.eps_omega, cfg.n_remesh, cfg.n_assim, cfg.assim_interval)
    if key in _TRUTH_CACHE:
        return _TRUTH_CACHE[key]
    domain = box_domain()
    dp = cfg.dp / r
    kernel = SmoothingKernel(cfg.eps_ratio * dp, 2)
    solver = VicSolver(cfg.n_grid * r, domain)
    p = DipoleParams(cfg.U, cfg.R, cfg.alpha, cfg.center)
    state = lamb_chaplygin_init(p, dp, cfg.eps_omega, kernel, cfg.nu, domain)
    dt = cfg.dt / r
    n = int(round(cfg.assim_interval / dt))
    traj = [state]
    for _ in range(cfg.n_assim):
        state = forecast_2d(state, n, dt, solver, dp, cfg.eps_omega, cfg.n_remesh)
        traj.append(state)
    _TRUTH_CACHE[key] = traj
    return traj


def generate_ensemble_2d(cfg: Experiment2DConfig, streams: RngStreams,
                         setup: Vortex2DSetup | None = None):
    """Sampled dipoles; returns states and per-member ``(U, R, alpha, cx, cy, nu)`` records."""
    setup = setup or Vortex2DSetup(cfg)
    members, draws = [], []
    for i in range(cfg.n_members):
        g = streams.get("ensemble", i)
        R = abs(cfg.R_dist.sample(g))
        alpha = cfg.alpha_dist.sample(g)
        center = (cfg.center_dist.sample(g), cfg.center_dist.sample(g))
        U = cfg.U_dist.sample(g)
        nu = max(cfg.nu_dist.sample(g), cfg.nu_min)
        p = DipoleParams(U, R, alpha, center)
        members.append(lamb_chaplygin_init(p, setup.dp, cfg.eps_omega, setup.kernel, nu,
                                           setup.domain))
        draws.append({"U": U, "R": R, "alpha": alpha, "cx": center[0], "cy": center[1], "nu": nu})
    return members, draws


def run_2d(cfg: Experiment2DConfig, out_dir=None, threads: int | None = None) -> TwinResult:
    threads = resolve_threads(threads)
    setup = Vortex2DSetup(cfg)
    streams = RngStreams(cfg.seed)
    truth = truth_trajectory_2d(cfg)
    states, draws = generate_ensemble_2d(cfg, streams, setup)
    nus = np.array([d["nu"] for d in draws])
    N = cfg.n_members
    n_steps = cfg.steps_per_window

    metrics, params_rows = [], []

    def record(step, prior):
        gt = vorticity_on(truth[step], setup.quad)
        errs = member_errors_omega(states, gt, setup.quad)
        row = {"step": step, "time": step * cfg.assim_interval,
               "e_omega_forecast": prior if prior is not None else float(np.mean(errs)),
               "e_omega": float(np.mean(errs))}
        row.update(zip(member_cols("err", N), errs))
        row.update(zip(member_cols("np", N), (len(s.particles) for s in states)))
        metrics.append(row)
        p = {"step": step, "time": row["time"]}
        for name in ("U", "R", "alpha", "cx", "cy", "nu"):
            p.update(zip(member_cols(name, N), (d[name] for d in draws)))
        params_rows.append(p)

    initial = list(states)
    record(0, None)
    for k in range(1, cfg.n_assim + 1):
        states = _map_members(setup.forecast, [(s, n_steps) for s in states], threads, k)
        gt = vorticity_on(truth[k], setup.quad)
        prior = float(np.mean(member_errors_omega(states, gt, setup.quad)))

        y_true = observe_velocity(truth[k], setup.points, setup.solver)
        noise = streams.get("observation", 0, k).standard_normal(len(y_true))
        obs = ObservationSpec(y_true + cfg.sigma_obs * noise, cfg.sigma_obs**2)
        ens = LagrangianEnsemble([s.particles for s in states])
        fcfg = setup.filter_config(streams.members("perturbation", N, k))
        try:
            with threadpool_limits(1):
                ens = assimilate(ens, obs, fcfg)
        except Exception as exc:
            raise ExperimentError(f"assimilation {k}: {exc}") from exc
        states = [VortexState(ps, nu) for ps, nu in zip(ens.members, nus)]
        record(k, prior)

    result = TwinResult(metrics, params_rows, states, truth[-1],
                        extra={"draws": draws, "initial": initial, "setup": setup})
    if out_dir is not None:
        def snapshot(snap):
            truth[-1].particles.to_csv(snap / "truth_final.csv")
            for tag, mems in (("initial", initial), ("final", states)):
                for i, s in enumerate(mems):
                    s.particles.to_csv(snap / f"{tag}_member_{i:02d}.csv")
        _write(result, out_dir, snapshot)
    return result


def run_twin_experiment(cfg, out_dir=None, threads: int | None = None) -> TwinResult:
    if isinstance(cfg, Experiment1DConfig):
        return run_1d(cfg, out_dir, threads)
    if isinstance(cfg, Experiment2DConfig):
        return run_2d(cfg, out_dir, threads)
    raise TypeError(f"unsupported config type {type(cfg).__name__}")
