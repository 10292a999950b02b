"""Particle-to-grid projection, grid interpolation and lattice regeneration."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np

from .kernels import RedistributionKernel, SmoothingKernel
from .particles import Domain, ParticleSet, _as_points

# nodes beyond a closed box that may receive mass before being folded back
HALO = 2


class OutsideGridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class UniformGrid:
    origin: np.ndarray
    spacing: float
    shape: tuple[int, ...]
    values: np.ndarray
    periodic: bool = False

    def __post_init__(self):
        origin = np.array(self.origin, dtype=float).reshape(-1)
        shape = tuple(int(n) for n in self.shape)
        if not self.spacing > 0 or any(n < 1 for n in shape) or len(shape) != len(origin):
            raise ValueError("invalid grid geometry")
        vals = np.array(self.values, dtype=float)
        if vals.size != int(np.prod(shape)):
            raise ValueError(f"expected {np.prod(shape)} nodal values, got {vals.size}")
        vals = vals.reshape(shape)
        origin.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "spacing", float(self.spacing))

    @classmethod
    def periodic_1d(cls, n: int, length: float = 2 * np.pi, values=None) -> "UniformGrid":
        vals = np.zeros(n) if values is None else values
        return cls(np.zeros(1), length / n, (n,), vals, periodic=True)

    @classmethod
    def box(cls, lower, upper, n_cells: int, values=None) -> "UniformGrid":
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        h = (upper - lower) / n_cells
        if not np.allclose(h, h[0], rtol=1e-12):
            raise ValueError("box grids need square cells")
        shape = (n_cells + 1,) * len(lower)
        vals = np.zeros(shape) if values is None else values
        return cls(lower, float(h[0]), shape, vals, periodic=False)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def node_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axis(self, k: int) -> np.ndarray:
        return self.origin[k] + self.spacing * np.arange(self.shape[k])

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(size, dim)`` in C order."""
        mesh = np.meshgrid(*[self.axis(k) for k in range(self.dim)], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def domain(self) -> Domain:
        if self.periodic:
            return Domain(tuple(self.origin), tuple(self.origin + self.spacing * np.array(self.shape)),
                          periodic=True)
        return Domain.box(self.origin, self.origin + self.spacing * (np.array(self.shape) - 1))

    def same_geometry(self, other: "UniformGrid") -> bool:
        return (self.shape == other.shape and self.periodic == other.periodic
                and np.isclose(self.spacing, other.spacing, rtol=1e-12)
                and np.allclose(self.origin, other.origin, rtol=0, atol=1e-12))

    def with_values(self, values) -> "UniformGrid":
        return UniformGrid(self.origin, self.spacing, self.shape, values, self.periodic)

    def zeros(self) -> "UniformGrid":
        return self.with_values(np.zeros(self.shape))

    def total(self) -> float:
        return float(self.values.sum() * self.node_volume)

    def to_csv(self, path) -> None:
        cols = ["x", "y"][: self.dim] + ["value"]
        nodes = self.nodes()
        vals = self.values.ravel()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for i in range(len(vals)):
                w.writerow([repr(float(c)) for c in nodes[i]] + [repr(float(vals[i]))])


def _stencil(grid: UniformGrid, w: RedistributionKernel, x: np.ndarray, mode: str):
    """Flat node indices and tensor weights of the kernel stencil around each point.

    ``mode`` is ``"fold"`` (closed box: halo nodes clamped onto the boundary)
    or ``"zero"`` (closed box: nodes outside the grid contribute nothing).
    """
    s = w.support
    offs = np.arange(-s + 1, s + 1)
    idx_axes, w_axes = [], []
    for k in range(grid.dim):
        rel = (x[:, k] - grid.origin[k]) / grid.spacing
        ii = np.floor(rel).astype(np.int64)[:, None] + offs
        wk = w.weights(rel[:, None] - ii)
        n = grid.shape[k]
        if grid.periodic:
            ii = np.mod(ii, n)
        else:
            outside = (ii < 0) | (ii > n - 1)
            if mode == "fold":
                bad = ((ii < -HALO) | (ii > n - 1 + HALO)) & (wk != 0)
                if bad.any():
                    p = int(np.nonzero(bad.any(axis=1))[0][0])
                    raise OutsideGridError(f"particle {p} at {x[p]} lies outside the grid halo")
            else:
                wk = np.where(outside, 0.0, wk)
            ii = np.clip(ii, 0, n - 1)
        idx_axes.append(ii)
        w_axes.append(wk)
    if grid.dim == 1:
        return idx_axes[0], w_axes[0]
    m = len(x)
    flat = np.zeros((m, 1), dtype=np.int64)
    wt = np.ones((m, 1))
    for k in range(grid.dim):
        flat = (flat[:, :, None] * grid.shape[k] + idx_axes[k][:, None, :]).reshape(m, -1)
        wt = (wt[:, :, None] * w_axes[k][:, None, :]).reshape(m, -1)
    return flat, wt


def project_to_grid(ps: ParticleSet, grid: UniformGrid, w: RedistributionKernel | None = None,
                    dp: float | None = None) -> UniformGrid:
    """Nodal values ``u_i = V_i**-1 sum_p U_p W((x_i - x_p) / l)``."""
    w = w or RedistributionKernel("m4prime", grid.dim)
    if dp is not None and not np.isclose(grid.spacing, 2.0 * dp, rtol=1e-12):
        raise ValueError(f"grid spacing {grid.spacing} must equal 2*dp = {2 * dp}")
    if len(ps) == 0:
        return grid.zeros()
    idx, wt = _stencil(grid, w, ps.positions, "fold")
    vals = np.bincount(idx.ravel(), weights=(ps.intensities[:, None] * wt).ravel(),
                       minlength=grid.size)
    return grid.with_values(vals.reshape(grid.shape) / grid.node_volume)


def _check_inside(grid: UniformGrid, x: np.ndarray) -> None:
    if grid.periodic:
        return
    hi = grid.origin + grid.spacing * (np.array(grid.shape) - 1)
    tol = 1e-12 * grid.spacing * max(grid.shape)
    bad = np.any((x < grid.origin - tol) | (x > hi + tol), axis=1)
    if bad.any():
        p = int(np.nonzero(bad)[0][0])
        raise OutsideGridError(f"point {p} at {x[p]} lies outside the grid")


def grid_interp_field(grid: UniformGrid, w: RedistributionKernel | None, x) -> np.ndarray:
    """``u(x) = sum_i u_i W((x - x_i) / l)``."""
    w = w or RedistributionKernel("m4prime", grid.dim)
    pts = _as_points(x, grid.dim)
    _check_inside(grid, pts)
    idx, wt = _stencil(grid, w, pts, "zero")
    return np.sum(grid.values.ravel()[idx] * wt, axis=1)


def lattice_positions(grid: UniformGrid) -> np.ndarray:
    """Candidate particles at 1/4 and 3/4 of each cell along every axis."""
    axes = []
    for k in range(grid.dim):
        n_cells = grid.shape[k] if grid.periodic else grid.shape[k] - 1
        left = grid.origin[k] + grid.spacing * np.arange(n_cells)
        axes.append(np.sort(np.concatenate([left + 0.25 * grid.spacing,
                                            left + 0.75 * grid.spacing])))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def regenerate_particles(grid: UniformGrid, w: RedistributionKernel | None, dp: float,
                         eps_cut: float, kernel: SmoothingKernel,
                         domain: Domain | None = None) -> ParticleSet:
    """Fresh regular particles with ``U = u_g(x*) dp**d``, kept only where ``|u_g(x*)| > eps_cut``."""
    if not np.isclose(grid.spacing, 2.0 * dp, rtol=1e-12):
        raise ValueError(f"particle spacing {dp} must be half the grid spacing {grid.spacing}")
    domain = domain or grid.domain()
    x = lattice_positions(grid)
    u = grid_interp_field(grid, w, x)
    keep = np.abs(u) > eps_cut
    V = dp ** grid.dim
    return ParticleSet(x[keep], u[keep] * V, np.full(int(keep.sum()), V), kernel, domain)


def remesh(ps: ParticleSet, grid: UniformGrid, dp: float, eps_cut: float = 0.0,
           w: RedistributionKernel | None = None) -> ParticleSet:
    g = project_to_grid(ps, grid, w, dp=dp)
    return regenerate_particles(g, w, dp, eps_cut, ps.kernel, ps.domain)


def moments(positions: np.ndarray, weights: np.ndarray, order: int = 2) -> list[np.ndarray]:
    """Raw moments ``sum w x^a`` for every multi-index ``|a| <= order``."""
    pts = np.asarray(positions, dtype=float).reshape(len(weights), -1)
    out = []
    for k in range(order + 1):
        for a in itertools.combinations_with_replacement(range(pts.shape[1]), k):
            mono = np.prod(pts[:, list(a)], axis=1) if a else np.ones(len(pts))
            out.append(float(np.sum(weights * mono)))
    return out
