"""Quick oracle checks runnable from the command line (``lagenkf verify``)."""

from __future__ import annotations

import time
from typing import Callable

import numpy as np

from .enkf import anomalies, correction_matrix, observation_anomalies, perturb_observations
from .kernels import RedistributionKernel, SmoothingKernel, m4prime
from .particles import Domain, ParticleSet
from .remeshing import UniformGrid, moments, remesh
from .vortex import VicSolver


def check_kernel_mass() -> float:
    x = np.linspace(-12, 12, 4801)
    k = SmoothingKernel(0.7)
    return abs(np.trapezoid(k(x), x) - 1.0)


def check_m4_partition() -> float:
    r = np.linspace(0, 1, 101)
    return float(np.max(np.abs(sum(m4prime(r - j) for j in range(-2, 3)) - 1.0)))


def check_remesh_moments() -> float:
    dp = 2 * np.pi / 64
    grid = UniformGrid.periodic_1d(32)
    k = SmoothingKernel(1.3 * dp, 1, period=2 * np.pi)
    x = np.pi + 0.37 + dp * np.arange(-20, 20)
    U = np.exp(-((x - np.pi) ** 2)) * dp
    ps = ParticleSet(x[:, None], U, np.full(len(x), dp), k, Domain.periodic_1d())
    new = remesh(ps, grid, dp)
    m0, m1 = moments(ps.positions, ps.intensities), moments(new.positions, new.intensities)
    return max(abs(a - b) / max(abs(a), 1.0) for a, b in zip(m0, m1))


def check_enkf_smw(n_cases: int = 50, seed: int = 7) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        n, m, N = rng.integers(2, 11), rng.integers(1, 7), rng.integers(2, 9)
        Z = rng.standard_normal((n, N))
        H = rng.standard_normal((m, n))
        P = H @ Z
        R = np.diag(rng.uniform(0.1, 2.0, m))
        D = perturb_observations(rng.standard_normal(m), R, N, rng)
        F = correction_matrix(observation_anomalies(P), R, D, P)
        X, Y = anomalies(Z, P)
        K = X @ Y.T @ np.linalg.inv(Y @ Y.T + R)
        gain = Z + K @ (D - P)
        worst = max(worst, np.max(np.abs(Z + Z @ F - gain)) / max(np.max(np.abs(gain)), 1.0))
    return worst


def check_poisson_manufactured() -> float:
    s = VicSolver(32)
    x = s.grid.nodes()
    psi = (np.sin(x[:, 0]) * np.sin(x[:, 1])).reshape(s.grid.shape)
    return float(np.max(np.abs(s.stream_function(2.0 * psi) - psi)))


CHECKS: dict[str, tuple[Callable[[], float], float]] = {
    "kernel unit mass": (check_kernel_mass, 1e-10),
    "M4' partition of unity": (check_m4_partition, 1e-12),
    "remesh moments 0-2": (check_remesh_moments, 1e-10),
    "EnKF member form equals gain form": (check_enkf_smw, 1e-10),
    "Poisson manufactured solution": (check_poisson_manufactured, 1e-10),
}


def run_checks(out=print) -> bool:
    ok = True
    for name, (fn, tol) in CHECKS.items():
        t0 = time.perf_counter()
        err = fn()
        passed = bool(err <= tol)
        ok &= passed
        out(f"{'PASS' if passed else 'FAIL'}  {name}: error {err:.3e} (tol {tol:g}, "
            f"{time.perf_counter() - t0:.2f}s)")
    return ok
