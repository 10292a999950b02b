"""Particle sets, kernel field evaluation and intensity construction."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.linalg as sla

from ._neighbours import gaussian_sum_2d
from .kernels import SmoothingKernel

TWO_PI = 2.0 * np.pi


class SingularSystemError(ValueError):
    pass


@dataclass(frozen=True)
class Domain:
    """Axis-aligned domain, either fully periodic or a closed box."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    periodic: bool = False

    @classmethod
    def periodic_1d(cls, length: float = TWO_PI) -> "Domain":
        return cls((0.0,), (float(length),), periodic=True)

    @classmethod
    def box(cls, lower, upper) -> "Domain":
        return cls(tuple(map(float, lower)), tuple(map(float, upper)), periodic=False)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lower) + np.asarray(self.upper))

    def wrap(self, x: np.ndarray) -> np.ndarray:
        if not self.periodic:
            return x
        lo = np.asarray(self.lower)
        out = lo + np.mod(x - lo, self.extent)
        # mod can round up to exactly the period
        return np.where(out >= np.asarray(self.upper), lo, out)

    def clamp(self, x: np.ndarray) -> np.ndarray:
        if self.periodic:
            return self.wrap(x)
        return np.clip(x, self.lower, self.upper)

    def displacement(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """``a - b`` using the minimum-image convention on periodic domains."""
        d = a - b
        if self.periodic:
            L = self.extent
            d = d - L * np.round(d / L)
        return d


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ParticleSet:
    positions: np.ndarray
    intensities: np.ndarray
    volumes: np.ndarray
    kernel: SmoothingKernel
    domain: Domain

    def __post_init__(self):
        dim = self.domain.dim
        pos = np.asarray(self.positions, dtype=float).reshape(-1, dim)
        U = np.asarray(self.intensities, dtype=float).reshape(-1)
        V = np.asarray(self.volumes, dtype=float).reshape(-1)
        if not (len(pos) == len(U) == len(V)):
            raise ValueError("positions, intensities and volumes must have equal length")
        if np.any(V <= 0):
            raise ValueError("particle volumes must be positive")
        if self.kernel.dim != dim:
            raise ValueError("kernel and domain dimensions differ")
        object.__setattr__(self, "positions", _frozen(self.domain.wrap(pos)))
        object.__setattr__(self, "intensities", _frozen(U))
        object.__setattr__(self, "volumes", _frozen(V))

    def __len__(self) -> int:
        return len(self.intensities)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def with_intensities(self, U) -> "ParticleSet":
        return ParticleSet(self.positions, U, self.volumes, self.kernel, self.domain)

    def with_positions(self, x) -> "ParticleSet":
        return ParticleSet(x, self.intensities, self.volumes, self.kernel, self.domain)

    def __call__(self, x) -> np.ndarray:
        return eval_field(self, x)

    def total(self) -> float:
        return float(self.intensities.sum())

    def to_csv(self, path) -> None:
        cols = ["x", "y"][: self.dim] + ["U", "V"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for p in range(len(self)):
                w.writerow([repr(float(c)) for c in self.positions[p]]
                           + [repr(float(self.intensities[p])), repr(float(self.volumes[p]))])

    @classmethod
    def from_csv(cls, path, kernel: SmoothingKernel, domain: Domain) -> "ParticleSet":
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        d = domain.dim
        if data.size == 0:
            data = np.zeros((0, d + 2))
        return cls(data[:, :d], data[:, d], data[:, d + 1], kernel, domain)


def empty_set(kernel: SmoothingKernel, domain: Domain) -> ParticleSet:
    d = domain.dim
    return ParticleSet(np.zeros((0, d)), np.zeros(0), np.zeros(0), kernel, domain)


def _as_points(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if dim == 1:
        return x.reshape(-1, 1)
    return x.reshape(-1, dim)


def kernel_matrix(x, ps: ParticleSet) -> np.ndarray:
    """Dense ``Phi[i, p] = phi_eps(x_i - x_p)``."""
    x = _as_points(x, ps.dim)
    d = ps.domain.displacement(x[:, None, :], ps.positions[None, :, :])
    return ps.kernel(d)


def _uses_neighbour_list(ps: ParticleSet) -> bool:
    return ps.dim == 2 and ps.kernel.period is None


def eval_field(ps: ParticleSet, x, chunk: int = 4096) -> np.ndarray:
    """``sum_p U_p phi_eps(x - x_p)`` at each point of ``x``."""
    pts = _as_points(x, ps.dim)
    if len(ps) == 0:
        return np.zeros(len(pts))
    if _uses_neighbour_list(ps):
        return gaussian_sum_2d(np.ascontiguousarray(pts), np.ascontiguousarray(ps.positions),
                               np.ascontiguousarray(ps.intensities), ps.kernel.eps,
                               ps.kernel.cutoff_radius)
    out = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        out[s:s + chunk] = kernel_matrix(pts[s:s + chunk], ps) @ ps.intensities
    return out


def init_from_function(f: Callable[[np.ndarray], np.ndarray], positions, volumes,
                       kernel: SmoothingKernel, domain: Domain,
                       eps_cut: float = 0.0) -> ParticleSet:
    """Intensities ``U_p = f(x_p) V_p``; particles with ``|f(x_p)| <= eps_cut`` are dropped."""
    pos = domain.wrap(_as_points(positions, domain.dim))
    V = np.broadcast_to(np.asarray(volumes, dtype=float), (len(pos),))
    vals = np.asarray(f(pos[:, 0] if domain.dim == 1 else pos), dtype=float).reshape(-1)
    keep = np.abs(vals) > eps_cut
    return ParticleSet(pos[keep], vals[keep] * V[keep], V[keep], kernel, domain)


@dataclass(frozen=True)
class BealeResult:
    particles: ParticleSet
    residual: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list)


def beale_correct(ps: ParticleSet, targets, max_iters: int = 20,
                  tol: float = 1e-10) -> BealeResult:
    """Fixed-point correction of intensities so the field matches ``targets`` at the particles.

    Never raises on non-convergence; a ``RuntimeWarning`` is emitted and
    ``converged`` is False.
    """
    t = np.asarray(targets, dtype=float).reshape(-1)
    if len(t) != len(ps):
        raise ValueError("need one target per particle")
    cur = ps
    res = t - eval_field(cur, cur.positions)
    history = [float(np.max(np.abs(res), initial=0.0))]
    it = 0
    while history[-1] > tol and it < max_iters:
        cur = cur.with_intensities(cur.intensities + res * cur.volumes)
        res = t - eval_field(cur, cur.positions)
        history.append(float(np.max(np.abs(res), initial=0.0)))
        it += 1
    converged = history[-1] <= tol
    if not converged:
        warnings.warn(f"Beale iteration stopped after {it} iterations with residual "
                      f"{history[-1]:.3e}", RuntimeWarning, stacklevel=2)
    return BealeResult(cur, history[-1], it, converged, history)


def default_ridge_lambda(ps: ParticleSet) -> float:
    # trace(Phi) / N_p is phi_eps(0)
    return 1e-8 * ps.kernel.at_origin()


def ridge_fit(ps: ParticleSet, targets, lam: float | None = None) -> ParticleSet:
    """Intensities minimising ``|targets - Phi U|^2 + lam |U|^2``."""
    t = np.asarray(targets, dtype=float).reshape(-1)
    if len(t) != len(ps) or len(ps) == 0:
        raise ValueError("need one target per particle and at least one particle")
    if lam is None:
        lam = default_ridge_lambda(ps)
    if lam < 0:
        raise ValueError("ridge penalty must be non-negative")
    Phi = kernel_matrix(ps.positions, ps)
    A = Phi.T @ Phi + lam * np.eye(len(ps))
    try:
        c = sla.cho_factor(A, lower=True)
        U = sla.cho_solve(c, Phi.T @ t)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            f"normal matrix is singular (lambda={lam}); use a ridge penalty lambda > 0") from exc
    if not np.all(np.isfinite(U)):
        raise SingularSystemError("ridge solve produced non-finite intensities; increase lambda")
    return ps.with_intensities(U)
