"""Error measures for twin experiments."""

from __future__ import annotations

import numpy as np


def l2_norm_sq(values, weights) -> np.ndarray:
    """Squared L2 norm along the last axis for quadrature ``weights`` (scalar spacing or array)."""
    return np.sum(np.asarray(weights) * np.asarray(values, dtype=float) ** 2, axis=-1)


def member_rel_errors(members, truth, weights) -> np.ndarray:
    """``||u_i - u_gt|| / ||u_gt||`` per member; ``members`` is ``(N, n_quad)``."""
    truth = np.asarray(truth, dtype=float)
    nt = l2_norm_sq(truth, weights)
    if not nt > 0:
        raise ValueError("truth has zero norm")
    return np.sqrt(l2_norm_sq(np.atleast_2d(members) - truth, weights) / nt)


def compute_rrmse(members, truth, weights) -> float:
    """Relative ensemble RMSE: root of the member-mean squared error over the truth norm."""
    return float(np.sqrt(np.mean(member_rel_errors(members, truth, weights) ** 2)))


def rrmse_param(values, truth: float) -> float:
    if truth == 0:
        raise ValueError("parameter truth is zero")
    v = np.asarray(values, dtype=float)
    return float(np.sqrt(np.mean((v - truth) ** 2)) / abs(truth))
