"""Periodic 1D advection-diffusion testbed: exact solution, particle and finite-difference models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import PseKernel, RedistributionKernel
from .particles import ParticleSet, eval_field
from .remeshing import UniformGrid, grid_interp_field

TWO_PI = 2.0 * np.pi


class StabilityError(ValueError):
    pass


@dataclass(frozen=True)
class Model1DParams:
    v: float
    D: float
    dt: float
    dp: float = TWO_PI / 100
    eps: float | None = None
    period: float = TWO_PI
    # finite-difference node spacing used for the stability check
    h: float = TWO_PI / 100

    def __post_init__(self):
        if not self.D > 0:
            raise ValueError("diffusion coefficient must be positive")
        if not self.dt > 0:
            raise ValueError("time step must be positive")
        if self.eps is None:
            object.__setattr__(self, "eps", 1.3 * self.dp)
        if abs(self.v) * self.dt / self.h > 1.0 + 1e-12:
            raise StabilityError(f"advective CFL |v| dt / h = {abs(self.v) * self.dt / self.h:.3f} > 1")
        if 2.0 * self.D * self.dt / self.h**2 > 1.0 + 1e-12:
            raise StabilityError(f"diffusion number 2 D dt / h^2 = {2 * self.D * self.dt / self.h**2:.3f} > 1")

    @staticmethod
    def stable_substeps(v: float, D: float, duration: float, dt_max: float, h: float,
                        safety: float = 0.9) -> int:
        """Smallest step count over ``duration`` satisfying both FD limits and ``dt <= dt_max``."""
        limits = [dt_max, safety * h / max(abs(v), 1e-300), safety * h**2 / (2.0 * max(D, 1e-300))]
        return max(1, int(np.ceil(duration / min(limits) - 1e-9)))


def periodic_heat_kernel(x, t: float, k_max: int | None = None,
                         period: float = TWO_PI) -> np.ndarray:
    """Image sum of the free-space heat kernel; ``k_max=None`` picks enough images for
    the truncated tail to sit below double precision."""
    if not t > 0:
        raise ValueError("heat kernel needs t > 0")
    if k_max is None:
        # exp(-(period (k + 1/2))^2 / 4t) < 1e-17 beyond k_max
        k_max = max(5, int(np.ceil(np.sqrt(4.0 * t * 40.0) / period + 0.5)))
    x = np.asarray(x, dtype=float)
    x = x - period * np.round(x / period)
    out = np.zeros_like(x)
    for k in range(-k_max, k_max + 1):
        out += np.exp(-((x - period * k) ** 2) / (4.0 * t))
    return out / np.sqrt(4.0 * np.pi * t)


def ground_truth_1d(x, t: float, x0: float, sigma0: float, v: float, D: float) -> np.ndarray:
    return periodic_heat_kernel(np.asarray(x) - v * t - x0, D * t + 0.5 * sigma0**2)


def pse_rates_1d(ps: ParticleSet, eps: float | None = None) -> np.ndarray:
    """``eps**-2 sum_q (V_p U_q - V_q U_p) eta_eps(x_q - x_p)`` on a periodic line."""
    eps = ps.kernel.eps if eps is None else eps
    eta = PseKernel(eps, 1, ps.kernel.period, ps.kernel.n_images)
    x = ps.positions[:, 0]
    d = ps.domain.displacement(x[:, None], x[None, :])
    W = eta(d)
    U, V = ps.intensities, ps.volumes
    ex = (V[:, None] * U[None, :] - V[None, :] * U[:, None]) * W
    return ex.sum(axis=1) / eps**2


def lagrangian_step_1d(ps: ParticleSet, prm: Model1DParams) -> ParticleSet:
    """Advect by ``v dt`` then one explicit Euler PSE step."""
    moved = ps.with_positions(ps.positions + prm.v * prm.dt)
    dU = prm.dt * prm.D * pse_rates_1d(moved, prm.eps)
    return moved.with_intensities(moved.intensities + dU)


def eulerian_fd_step(grid: UniformGrid, prm: Model1DParams) -> UniformGrid:
    """Upwind advection, centred diffusion, explicit Euler, periodic nodes."""
    if not grid.periodic or grid.dim != 1:
        raise ValueError("finite-difference model runs on a periodic 1D grid")
    h = grid.spacing
    if abs(prm.v) * prm.dt / h > 1.0 + 1e-12 or 2 * prm.D * prm.dt / h**2 > 1.0 + 1e-12:
        raise StabilityError("time step violates the finite-difference stability limits")
    u = grid.values
    up, um = np.roll(u, -1), np.roll(u, 1)
    adv = prm.v * (u - um) / h if prm.v >= 0 else prm.v * (up - u) / h
    diff = prm.D * (up - 2.0 * u + um) / h**2
    return grid.with_values(u + prm.dt * (diff - adv))


def forecast_particles_1d(ps: ParticleSet, v: float, D: float, duration: float,
                          dt_max: float, h: float) -> ParticleSet:
    n = Model1DParams.stable_substeps(v, D, duration, dt_max, h)
    prm = Model1DParams(v, D, duration / n, dp=ps.volumes.mean() if len(ps) else h,
                        eps=ps.kernel.eps, period=ps.domain.extent[0], h=h)
    for _ in range(n):
        ps = lagrangian_step_1d(ps, prm)
    return ps


def forecast_grid_1d(grid: UniformGrid, v: float, D: float, duration: float,
                     dt_max: float) -> UniformGrid:
    h = grid.spacing
    n = Model1DParams.stable_substeps(v, D, duration, dt_max, h)
    prm = Model1DParams(v, D, duration / n, dp=h, period=grid.spacing * grid.shape[0], h=h)
    for _ in range(n):
        grid = eulerian_fd_step(grid, prm)
    return grid


def observe_points_1d(state, locations,
                      w: RedistributionKernel | None = None) -> np.ndarray:
    if isinstance(state, ParticleSet):
        return eval_field(state, locations)
    return grid_interp_field(state, w, locations)
