"""Smoothing, PSE and redistribution kernels.

All kernels take displacements with a trailing axis of length ``dim`` and
return one value per displacement.  Two-dimensional kernels are tensor
products of the one-dimensional profiles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
_UNDERFLOW = np.sqrt(2.0 * 746.0)


def _gauss1d(x: np.ndarray, eps: float) -> np.ndarray:
    return _INV_SQRT_2PI / eps * np.exp(-0.5 * (x / eps) ** 2)


def _periodic_gauss1d(x: np.ndarray, eps: float, period: float, n_images: int) -> np.ndarray:
    # minimum image first so the truncated image sum is centred on the nearest copy
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return _periodic_gauss1d(x[None], eps, period, n_images)[0]
    x = x - period * np.round(x / period)
    out = _gauss1d(x, eps)
    # exp underflows to exactly zero beyond this distance, so skipping is lossless
    reach = _UNDERFLOW * eps
    for n in range(1, n_images + 1):
        if period * (n - 0.5) > reach:
            break
        for shift in (n * period, -n * period):
            d = x - shift
            near = np.abs(d) < reach
            if near.any():
                out[near] += _gauss1d(d[near], eps)
    return out


def _as_displacements(dx, dim: int) -> np.ndarray:
    dx = np.asarray(dx, dtype=float)
    if dim == 1 and (dx.ndim <= 1 or dx.shape[-1] != 1):
        dx = dx[..., None]
    if dx.shape[-1] != dim:
        raise ValueError(f"expected displacements with trailing axis {dim}, got {dx.shape}")
    return dx


@dataclass(frozen=True)
class SmoothingKernel:
    """Gaussian blob ``phi_eps(x) = eps**-d * phi(x / eps)`` with unit mass.

    Setting ``period`` turns it into the periodised kernel (image sum over
    ``|n| <= n_images`` on every axis).
    """

    eps: float
    dim: int = 1
    period: float | None = None
    n_images: int = 3
    # truncation radius in units of eps for neighbour-list summation
    cutoff: float = 5.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("smoothing length must be positive")
        if self.dim not in (1, 2):
            raise ValueError("only 1D and 2D kernels are supported")
        if self.period is not None and (self.period <= 0 or self.n_images < 1):
            raise ValueError("periodic kernel needs period > 0 and n_images >= 1")

    @property
    def family(self) -> str:
        return "gaussian" if self.period is None else "periodic-gaussian"

    @property
    def cutoff_radius(self) -> float:
        return self.cutoff * self.eps

    def profile(self, x: np.ndarray) -> np.ndarray:
        """One-dimensional factor of the kernel."""
        if self.period is None:
            return _gauss1d(x, self.eps)
        return _periodic_gauss1d(x, self.eps, self.period, self.n_images)

    def __call__(self, dx) -> np.ndarray:
        dx = _as_displacements(dx, self.dim)
        out = self.profile(dx[..., 0])
        for k in range(1, self.dim):
            out = out * self.profile(dx[..., k])
        return out

    def at_origin(self) -> float:
        return float(self(np.zeros((1, self.dim)))[0])


@dataclass(frozen=True)
class PseKernel:
    """Diffusion kernel for particle strength exchange.

    ``eta = 2 * phi`` with ``phi`` the standard normal profile, so that
    ``int x_k**2 eta(x) dx = 2`` on each axis and
    ``eps**-2 * sum_q V_q (u_q - u_p) eta_eps(x_q - x_p)`` approximates the
    Laplacian.
    """

    eps: float
    dim: int = 1
    period: float | None = None
    n_images: int = 3
    cutoff: float = 5.0

    # second moment of the standard normal profile is 1 per axis
    norm: float = 2.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("smoothing length must be positive")

    @property
    def smoothing(self) -> SmoothingKernel:
        return SmoothingKernel(self.eps, self.dim, self.period, self.n_images, self.cutoff)

    @property
    def cutoff_radius(self) -> float:
        return self.cutoff * self.eps

    def __call__(self, dx) -> np.ndarray:
        return self.norm * self.smoothing(dx)


def m4prime(r) -> np.ndarray:
    """Monaghan's M4' interpolation kernel (exact for quadratics)."""
    a = np.abs(np.asarray(r, dtype=float))
    inner = 1.0 - 2.5 * a**2 + 1.5 * a**3
    outer = 0.5 * (2.0 - a) ** 2 * (1.0 - a)
    return np.where(a < 1.0, inner, np.where(a < 2.0, outer, 0.0))


def linear_hat(r) -> np.ndarray:
    a = np.abs(np.asarray(r, dtype=float))
    return np.where(a < 1.0, 1.0 - a, 0.0)


_REDISTRIBUTION = {"m4prime": (m4prime, 2), "linear-hat": (linear_hat, 1)}


@dataclass(frozen=True)
class RedistributionKernel:
    """Interpolation/assignment kernel ``W`` in cell units."""

    family: str = "m4prime"
    dim: int = 1

    def __post_init__(self):
        if self.family not in _REDISTRIBUTION:
            raise ValueError(f"unknown redistribution kernel {self.family!r}")

    @property
    def support(self) -> int:
        return _REDISTRIBUTION[self.family][1]

    def weights(self, r) -> np.ndarray:
        """1D kernel values."""
        return _REDISTRIBUTION[self.family][0](r)

    def __call__(self, r) -> np.ndarray:
        r = _as_displacements(r, self.dim)
        out = self.weights(r[..., 0])
        for k in range(1, self.dim):
            out = out * self.weights(r[..., k])
        return out


M4PRIME = RedistributionKernel("m4prime", 1)


def kernel_eval(k: SmoothingKernel, x) -> np.ndarray:
    return k(x)


def redistribution_eval(w: RedistributionKernel, r) -> np.ndarray:
    return w(r)


def pse_eval(k: PseKernel, x) -> np.ndarray:
    return k(x)
