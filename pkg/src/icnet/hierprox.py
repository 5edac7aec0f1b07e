"""Hierarchical proximal operator coupling skip weights with the first layer.

For every feature ``j`` it solves, in closed form,

    min_{t, w}  1/2 (t - theta_j)^2 + 1/2 ||w - W_j||^2 + lam * |t|
    s.t.        ||w||_inf <= M |t|

where ``W_j`` is column ``j`` of the first-layer weight matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ProxParams:
    lam_step: float
    M: float

    def __post_init__(self):
        if not self.lam_step >= 0:
            raise ValueError("lam_step must be nonnegative")
        if not (self.M > 0 and np.isfinite(self.M)):
            raise ValueError("M must be positive and finite")


def hier_prox(theta, W1, p: ProxParams):
    """Apply the operator to every feature at once.

    Parameters
    ----------
    theta : array_like, shape (d,)
    W1 : array_like, shape (K, d)
        First-layer weights; column ``j`` belongs to feature ``j``.
    p : ProxParams

    Returns
    -------
    (theta_new, W1_new)
        ``max_i |W1_new[i, j]| <= M * |theta_new[j]|`` holds exactly in floating
        point, and a zero ``theta_new[j]`` zeroes the whole column.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    W1 = np.asarray(W1, dtype=float)
    if W1.ndim != 2 or W1.shape[1] != theta.size:
        raise ValueError(f"W1 must have shape (K, {theta.size}), got {W1.shape}")
    K, d = W1.shape
    M, lam = float(p.M), float(p.lam_step)

    absW = np.abs(W1)
    u = -np.sort(-absW, axis=0)  # descending per column
    cums = np.vstack([np.zeros(d), np.cumsum(u, axis=0)])  # (K+1, d)
    m = np.arange(K + 1)[:, None]
    w = M / (1.0 + m * M * M) * np.maximum(np.abs(theta) + M * cums - lam, 0.0)

    upper = np.vstack([np.full(d, np.inf), u])   # u_(m),   u_(0) = +inf
    lower = np.vstack([u, np.zeros(d)])          # u_(m+1), u_(K+1) = 0
    violation = np.maximum(w - upper, 0.0) + np.maximum(lower - w, 0.0)
    # first exact zero wins ties; argmin falls back to the least violated m under rounding
    pick = np.argmin(violation, axis=0)
    w_sel = w[pick, np.arange(d)]

    sign = np.where(theta < 0, -1.0, 1.0)
    theta_new = sign * (w_sel / M)
    cap = M * np.abs(theta_new)
    W_new = np.sign(W1) * np.minimum(absW, cap[None, :])
    return theta_new, W_new


def prox_objective(theta_j, W_j, t, w, p: ProxParams) -> float:
    """Objective minimised by :func:`hier_prox` for a single feature."""
    W_j = np.asarray(W_j, dtype=float)
    w = np.asarray(w, dtype=float)
    return float(0.5 * (t - theta_j) ** 2 + 0.5 * np.sum((w - W_j) ** 2) + p.lam_step * abs(t))


def full_shrinkage_bound(theta, W1, M: float) -> float:
    """Smallest ``lam_step`` that sends every feature to zero."""
    theta = np.asarray(theta, dtype=float)
    W1 = np.asarray(W1, dtype=float)
    return float(np.max(np.abs(theta) + M * np.abs(W1).sum(axis=0))) if theta.size else 0.0
