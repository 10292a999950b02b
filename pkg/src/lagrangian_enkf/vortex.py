"""2D vortex-particle testbed in a closed free-slip box.

Velocity comes from a vortex-in-cell step: circulations are assigned to a
uniform grid with M4', the stream function is obtained from a type-I sine
transform (psi = 0 on the walls), differentiated with centred differences
and interpolated back with M4'.  Diffusion uses particle strength exchange.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.fft
import scipy.special

from ._neighbours import m4_assign_2d, m4_interp_2d, pse_exchange_2d
from .kernels import PseKernel, RedistributionKernel, SmoothingKernel
from .particles import Domain, ParticleSet, empty_set, init_from_function
from .remeshing import UniformGrid, lattice_positions, project_to_grid, regenerate_particles

log = logging.getLogger(__name__)

# first positive zero of J1
J1_ZERO = float(scipy.special.jn_zeros(1, 1)[0])
M4_2D = RedistributionKernel("m4prime", 2)


@dataclass(frozen=True)
class DipoleParams:
    U: float = 0.25
    R: float = 0.5
    alpha: float = 7 * np.pi / 8
    center: tuple[float, float] = (np.pi / 2, np.pi / 2)

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("dipole radius must be positive")

    @property
    def k(self) -> float:
        return J1_ZERO / self.R

    def check_inside(self, domain: Domain) -> None:
        c = np.asarray(self.center)
        gap = np.min(np.concatenate([c - domain.lower, np.asarray(domain.upper) - c]))
        if gap <= self.R:
            raise ValueError("dipole must sit at distance > R from every wall")


def lamb_chaplygin_vorticity(x: np.ndarray, p: DipoleParams) -> np.ndarray:
    """``-2 k U J1(k r) / J0(k R) sin(theta - alpha)`` inside the disc, zero outside.

    ``theta`` is the polar angle about the centre, so the dipole travels
    along ``(cos alpha, sin alpha)``.
    """
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    d = x - np.asarray(p.center)
    r = np.hypot(d[:, 0], d[:, 1])
    theta = np.arctan2(d[:, 1], d[:, 0])
    k = p.k
    w = -2.0 * k * p.U * scipy.special.j1(k * r) / scipy.special.j0(k * p.R) * np.sin(theta - p.alpha)
    return np.where(r < p.R, w, 0.0)


@dataclass(frozen=True)
class VortexState:
    particles: ParticleSet
    nu: float

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("viscosity must be positive")

    def with_particles(self, ps: ParticleSet) -> "VortexState":
        return replace(self, particles=ps)


def box_domain(length: float = np.pi) -> Domain:
    return Domain.box((0.0, 0.0), (length, length))


def lattice(domain: Domain, dp: float) -> np.ndarray:
    n = int(round(domain.extent[0] / dp))
    g = UniformGrid.box(domain.lower, domain.upper, n // 2)
    return lattice_positions(g)


def lamb_chaplygin_init(p: DipoleParams, dp: float, eps_omega: float, kernel: SmoothingKernel,
                        nu: float = 0.0015, domain: Domain | None = None) -> VortexState:
    """Dipole sampled on the regular ``dp`` lattice; particles with ``|omega| <= eps_omega`` dropped."""
    domain = domain or box_domain()
    p.check_inside(domain)
    ps = init_from_function(lambda x: lamb_chaplygin_vorticity(x, p), lattice(domain, dp),
                            dp**2, kernel, domain, eps_cut=eps_omega)
    return VortexState(ps, nu)


@dataclass(frozen=True)
class VelocityField:
    ux: UniformGrid  # on the halo-extended grid
    uy: UniformGrid
    psi: np.ndarray  # (n + 1, n + 1) including the zero wall values
    omega: UniformGrid

    def __call__(self, x) -> np.ndarray:
        pts = np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1, 2))
        g = self.ux
        return m4_interp_2d(pts, g.values, self.uy.values, g.origin[0], g.origin[1], g.spacing)


class VicSolver:
    """Vortex-in-cell velocity on ``n_cells x n_cells`` square cells covering the box."""

    def __init__(self, n_cells: int, domain: Domain | None = None):
        if n_cells + 1 < 16:
            raise ValueError("VIC grid needs at least 16 nodes per axis")
        self.domain = domain or box_domain()
        self.n = n_cells
        self.grid = UniformGrid.box(self.domain.lower, self.domain.upper, n_cells)
        self.h = self.grid.spacing
        L = self.domain.extent
        m = np.arange(1, n_cells) * np.pi / L[0]
        q = np.arange(1, n_cells) * np.pi / L[1]
        self._inv_lap = 1.0 / (m[:, None] ** 2 + q[None, :] ** 2)
        self._lap = m[:, None] ** 2 + q[None, :] ** 2
        halo = 2
        self.ext = UniformGrid(self.grid.origin - halo * self.h, self.h,
                               (n_cells + 1 + 2 * halo,) * 2, np.zeros((n_cells + 1 + 2 * halo,) * 2))

    def vorticity(self, ps: ParticleSet) -> UniformGrid:
        """Nodal vorticity; mass landing on halo nodes is folded onto the walls."""
        if len(ps) and (np.any(ps.positions < np.asarray(self.domain.lower) - self.h)
                        or np.any(ps.positions > np.asarray(self.domain.upper) + self.h)):
            return project_to_grid(ps, self.grid, M4_2D)  # raises with the offending index
        g = self.grid
        vals = m4_assign_2d(np.ascontiguousarray(ps.positions), np.ascontiguousarray(ps.intensities),
                            g.origin[0], g.origin[1], g.spacing, g.shape[0], g.shape[1])
        return g.with_values(vals / g.node_volume)

    def stream_function(self, omega: np.ndarray) -> np.ndarray:
        """Solve ``Lap psi = -omega`` with ``psi = 0`` on the walls (spectral sine basis)."""
        inner = scipy.fft.dstn(omega[1:-1, 1:-1], type=1)
        psi = np.zeros_like(omega)
        psi[1:-1, 1:-1] = scipy.fft.idstn(inner * self._inv_lap, type=1)
        return psi

    def laplacian(self, psi: np.ndarray) -> np.ndarray:
        """Spectral Laplacian of a wall-vanishing nodal field (interior nodes)."""
        return -scipy.fft.idstn(scipy.fft.dstn(psi[1:-1, 1:-1], type=1) * self._lap, type=1)

    def field(self, ps: ParticleSet) -> VelocityField:
        omega = self.vorticity(ps)
        psi = self.stream_function(omega.values)
        ext = np.pad(psi, 3, mode="reflect", reflect_type="odd")
        h2 = 2 * self.h
        ux = (ext[1:-1, 2:] - ext[1:-1, :-2]) / h2
        uy = -(ext[2:, 1:-1] - ext[:-2, 1:-1]) / h2
        return VelocityField(self.ext.with_values(ux), self.ext.with_values(uy), psi, omega)

    def __call__(self, ps: ParticleSet) -> np.ndarray:
        if len(ps) == 0:
            return np.zeros((0, 2))
        return self.field(ps)(ps.positions)


def vic_velocity(state: VortexState, solver: VicSolver) -> tuple[VelocityField, np.ndarray]:
    f = solver.field(state.particles)
    return f, f(state.particles.positions)


def rk3_advect(state: VortexState, dt: float,
               velocity: Callable[[ParticleSet], np.ndarray], dp: float | None = None) -> VortexState:
    """Kutta's third-order scheme with the velocity re-evaluated at every stage."""
    ps = state.particles
    if len(ps) == 0:
        return state
    dom = ps.domain
    x0 = ps.positions
    k1 = velocity(ps)
    if dp is not None:
        vmax = float(np.max(np.abs(k1), initial=0.0))
        if vmax * dt > dp:
            log.warning("advective CFL exceeded: max|v| dt = %.3g > dp = %.3g", vmax * dt, dp)
    k2 = velocity(ps.with_positions(dom.clamp(x0 + 0.5 * dt * k1)))
    k3 = velocity(ps.with_positions(dom.clamp(x0 - dt * k1 + 2.0 * dt * k2)))
    x1 = dom.clamp(x0 + dt / 6.0 * (k1 + 4.0 * k2 + k3))
    return state.with_particles(ps.with_positions(x1))


def pse_rates_2d(ps: ParticleSet) -> np.ndarray:
    eta = PseKernel(ps.kernel.eps, 2, cutoff=ps.kernel.cutoff)
    return pse_exchange_2d(np.ascontiguousarray(ps.positions), np.ascontiguousarray(ps.intensities),
                           np.ascontiguousarray(ps.volumes), eta.eps, eta.cutoff_radius,
                           eta.norm) / eta.eps**2


def pse_2d(state: VortexState, dt: float) -> VortexState:
    ps = state.particles
    if len(ps) == 0:
        return state
    dG = dt * state.nu * pse_rates_2d(ps)
    return state.with_particles(ps.with_intensities(ps.intensities + dG))


def forecast_remesh(state: VortexState, dp: float, eps_omega: float,
                    solver: VicSolver) -> VortexState:
    """Project on the VIC grid and regenerate the lattice, dropping ``|omega| <= eps_omega``."""
    ps = state.particles
    g = project_to_grid(ps, solver.grid, M4_2D, dp=dp)
    new = regenerate_particles(g, M4_2D, dp, eps_omega, ps.kernel, ps.domain)
    return state.with_particles(new)


def remesh_steps(n_steps: int, n_remesh: int) -> set[int]:
    """Step indices (1-based) after which the forecast remeshes, evenly spaced and mid-interval."""
    if n_remesh <= 0:
        return set()
    interval = n_steps / n_remesh
    return {int(round((j + 0.5) * interval)) for j in range(n_remesh)}


def forecast_2d(state: VortexState, n_steps: int, dt: float, solver: VicSolver, dp: float,
                eps_omega: float, n_remesh: int = 2) -> VortexState:
    """RK3 advection plus PSE diffusion (viscous splitting) with periodic remeshing."""
    when = remesh_steps(n_steps, n_remesh)
    for s in range(1, n_steps + 1):
        state = rk3_advect(state, dt, solver)
        state = pse_2d(state, dt)
        if s in when:
            state = forecast_remesh(state, dp, eps_omega, solver)
    return state


def observe_velocity(state, points, solver: VicSolver) -> np.ndarray:
    """Velocity at each point, components interleaved ``(u_x, u_y)`` per point."""
    ps = state.particles if isinstance(state, VortexState) else state
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(ps) == 0:
        return np.zeros(2 * len(pts))
    return solver.field(ps)(pts).ravel()


def observation_points(n_per_axis: int, domain: Domain | None = None) -> np.ndarray:
    domain = domain or box_domain()
    axes = [lo + (np.arange(n_per_axis) + 0.5) * (hi - lo) / n_per_axis
            for lo, hi in zip(domain.lower, domain.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def trapezoid_weights(grid: UniformGrid) -> np.ndarray:
    w = np.ones(grid.shape)
    for k in range(grid.dim):
        sl = [slice(None)] * grid.dim
        for end in (0, -1):
            sl[k] = end
            w[tuple(sl)] *= 0.5
    return w * grid.node_volume


def vorticity_on(ps, quad: UniformGrid) -> np.ndarray:
    if isinstance(ps, VortexState):
        ps = ps.particles
    return project_to_grid(ps, quad, M4_2D).values


def ensemble_error_omega(members, truth, quad: UniformGrid) -> float:
    """``N**-1 sum_i int (omega_i - omega_gt)^2`` by trapezoid quadrature on ``quad``.

    ``members`` and ``truth`` are nodal arrays on ``quad`` or particle states
    (projected on ``quad`` first).
    """
    return float(np.mean(member_errors_omega(members, truth, quad)))


def member_errors_omega(members, truth, quad: UniformGrid) -> np.ndarray:
    w = trapezoid_weights(quad)
    gt = truth if isinstance(truth, np.ndarray) else vorticity_on(truth, quad)
    out = []
    for m in members:
        om = m if isinstance(m, np.ndarray) else vorticity_on(m, quad)
        out.append(float(np.sum(w * (om.reshape(quad.shape) - gt.reshape(quad.shape)) ** 2)))
    return np.asarray(out)


def empty_vortex(kernel: SmoothingKernel, nu: float, domain: Domain | None = None) -> VortexState:
    return VortexState(empty_set(kernel, domain or box_domain()), nu)
