"""Stochastic ensemble Kalman filter in member-combination form.

The analysis is written ``Z_a = Z + Z F`` where the ``N x N`` correction
matrix ``F`` depends only on the predicted observations, the observation
and its perturbations.  Everything that is specific to a discretisation
is left to the caller, which only needs to form linear combinations of
its members.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla


@dataclass(frozen=True)
class EnsembleBatch:
    states: np.ndarray  # (n, N)
    predictions: np.ndarray  # (m, N)

    def __post_init__(self):
        Z = np.atleast_2d(np.asarray(self.states, dtype=float))
        Yp = np.atleast_2d(np.asarray(self.predictions, dtype=float))
        if Z.shape[1] != Yp.shape[1]:
            raise ValueError("states and predictions must have one column per member")
        object.__setattr__(self, "states", Z)
        object.__setattr__(self, "predictions", Yp)

    @property
    def n_members(self) -> int:
        return self.states.shape[1]


@dataclass(frozen=True)
class ObservationSpec:
    """Observation ``y`` with noise covariance ``R``.

    ``R`` may be given as a full matrix or as a vector of variances.
    ``perturbed`` holds the perturbed observation matrix once drawn.
    """

    y: np.ndarray
    R: np.ndarray
    perturbed: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        R = np.asarray(self.R, dtype=float)
        if R.ndim == 0:
            R = np.full(len(y), float(R))
        if R.ndim == 1 and len(R) != len(y) or R.ndim == 2 and R.shape != (len(y), len(y)):
            raise ValueError("R does not match the observation size")
        if R.ndim == 2 and not np.allclose(R, R.T, rtol=0, atol=1e-12 * max(1.0, np.abs(R).max())):
            raise ValueError("R must be symmetric")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "R", R)
        self.cholesky()

    @property
    def diagonal(self) -> bool:
        return self.R.ndim == 1

    @property
    def size(self) -> int:
        return len(self.y)

    def matrix(self) -> np.ndarray:
        return np.diag(self.R) if self.diagonal else self.R

    def cholesky(self) -> np.ndarray:
        """Lower Cholesky factor of ``R``; diagonal case returns standard deviations."""
        if self.diagonal:
            if np.any(self.R <= 0):
                raise np.linalg.LinAlgError("observation variances must be positive")
            return np.sqrt(self.R)
        return np.linalg.cholesky(self.R)

    def with_perturbed(self, D: np.ndarray) -> "ObservationSpec":
        return ObservationSpec(self.y, self.R, np.asarray(D, dtype=float))


def anomalies(batch_or_states, predictions=None) -> tuple[np.ndarray, np.ndarray]:
    """Normalised anomaly matrices ``A = (Z - mean) / sqrt(N-1)`` and ``Y`` likewise."""
    if isinstance(batch_or_states, EnsembleBatch):
        Z, P = batch_or_states.states, batch_or_states.predictions
    else:
        Z = np.atleast_2d(np.asarray(batch_or_states, dtype=float))
        P = np.atleast_2d(np.asarray(predictions, dtype=float))
    N = Z.shape[1]
    if N < 2:
        raise ValueError("an ensemble needs at least two members")
    s = 1.0 / np.sqrt(N - 1)
    return s * (Z - Z.mean(axis=1, keepdims=True)), s * (P - P.mean(axis=1, keepdims=True))


def observation_anomalies(predictions) -> np.ndarray:
    P = np.atleast_2d(np.asarray(predictions, dtype=float))
    N = P.shape[1]
    if N < 2:
        raise ValueError("an ensemble needs at least two members")
    return (P - P.mean(axis=1, keepdims=True)) / np.sqrt(N - 1)


def perturb_observations(y, R, n_members: int,
                         rng: np.random.Generator | Sequence[np.random.Generator]) -> np.ndarray:
    """Perturbed observations ``D[:, i] = y + L xi_i`` with ``L L^T = R``.

    ``rng`` is either one generator (columns drawn in member order) or one
    generator per member.
    """
    obs = ObservationSpec(y, R.R if isinstance(R, ObservationSpec) else R)
    L = obs.cholesky()
    m = obs.size
    if isinstance(rng, np.random.Generator):
        xi = rng.standard_normal((n_members, m)).T
    else:
        if len(rng) != n_members:
            raise ValueError("need one generator per member")
        xi = np.stack([g.standard_normal(m) for g in rng], axis=1)
    noise = L[:, None] * xi if obs.diagonal else L @ xi
    return obs.y[:, None] + noise


def _spd_solve(M: np.ndarray, B: np.ndarray) -> np.ndarray:
    try:
        return sla.cho_solve(sla.cho_factor(M, lower=True), B)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * np.trace(M) / len(M)
        try:
            return sla.cho_solve(sla.cho_factor(M + jitter * np.eye(len(M)), lower=True), B)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("I + Y^T R^-1 Y is not positive definite") from exc


def correction_matrix(Y, R, D, predictions) -> np.ndarray:
    """``F = (N-1)**-1/2 (I + Y^T R^-1 Y)^-1 Y^T R^-1 (D - predictions)``.

    Only ``N x N`` systems are solved; the ``m x m`` innovation covariance is
    never inverted.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    P = np.atleast_2d(np.asarray(predictions, dtype=float))
    m, N = Y.shape
    if D.shape != (m, N) or P.shape != (m, N):
        raise ValueError("Y, D and predictions must all be m x N")
    obs = R if isinstance(R, ObservationSpec) else ObservationSpec(np.zeros(m), R)
    if obs.diagonal:
        RinvY = Y / obs.R[:, None]
    else:
        RinvY = sla.cho_solve((obs.cholesky(), True), Y)
    M = np.eye(N) + Y.T @ RinvY
    return _spd_solve(M, RinvY.T @ (D - P)) / np.sqrt(N - 1)


def analysis_update(Z, F) -> np.ndarray:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    F = np.asarray(F, dtype=float)
    if F.shape != (Z.shape[1], Z.shape[1]):
        raise ValueError("F must be N x N")
    return Z + Z @ F


def apply_correction_rows(values, F) -> np.ndarray:
    """``theta_i + sum_j F_ji theta_j`` for member-indexed values (first axis)."""
    v = np.asarray(values, dtype=float)
    F = np.asarray(F, dtype=float)
    if v.shape[0] != F.shape[0]:
        raise ValueError("values must be indexed by member along the first axis")
    return v + np.tensordot(F.T, v, axes=1)


def ensemble_correction(predictions, obs: ObservationSpec, rng=None) -> np.ndarray:
    """Correction matrix for one analysis, drawing perturbations if ``obs`` has none."""
    P = np.atleast_2d(np.asarray(predictions, dtype=float))
    D = obs.perturbed
    if D is None:
        if rng is None:
            raise ValueError("no perturbed observations and no generator to draw them")
        D = perturb_observations(obs.y, obs, P.shape[1], rng)
    return correction_matrix(observation_anomalies(P), obs, D, P)
