"""Profile maximisation of the log-likelihood over the baseline cumulative hazard.

The baseline only enters the likelihood through its values on the inspection
times that carry a likelihood term, so it is parametrised by a nondecreasing
vector on that grid. The maximiser is found with a modified iterative convex
minorant (ICM) scheme: a diagonal Newton step projected onto the monotone cone
by weighted isotonic regression, safeguarded by step halving.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .core import Dataset, DomainError, StepCumulativeHazard, loglik, loglik_derivatives

logger = logging.getLogger(__name__)

CURVATURE_FLOOR = 1e-8


def weighted_pava(y, w) -> np.ndarray:
    """Weighted least-squares projection of ``y`` onto nondecreasing sequences.

    Parameters
    ----------
    y : array_like
        Sequence to monotonise.
    w : array_like
        Strictly positive weights, same length as ``y``.

    Returns
    -------
    numpy.ndarray
        ``argmin_x sum w_i (x_i - y_i)^2`` subject to ``x_1 <= ... <= x_n``.
        Each entry is the weighted mean of the pooled block it belongs to.
    """
    y = np.asarray(y, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    n = y.size
    if n == 0:
        raise ValueError("weighted_pava needs a nonempty input")
    if w.size != n:
        raise ValueError("y and w must have the same length")
    if not np.all(w > 0):
        raise ValueError("weights must be strictly positive")

    return _pava_kernel(y, w)


@njit(cache=True)
def _pava_kernel(y, w):
    n = y.size
    # block stack: running weighted sum, weight and block length
    sums = np.empty(n)
    weights = np.empty(n)
    sizes = np.empty(n, dtype=np.int64)
    top = -1
    for i in range(n):
        top += 1
        sums[top] = y[i] * w[i]
        weights[top] = w[i]
        sizes[top] = 1
        while top > 0 and sums[top - 1] * weights[top] > sums[top] * weights[top - 1]:
            sums[top - 1] += sums[top]
            weights[top - 1] += weights[top]
            sizes[top - 1] += sizes[top]
            top -= 1
    out = np.empty(n)
    pos = 0
    for k in range(top + 1):
        value = sums[k] / weights[k]
        for _ in range(sizes[k]):
            out[pos] = value
            pos += 1
    return out


@dataclass
class TimeGrid:
    """Distinct inspection times carrying likelihood terms.

    ``idx_u[i]`` (``idx_v[i]``) is the grid position of ``u_i`` (``v_i``), or -1
    when sample ``i`` does not use that endpoint.
    """

    points: np.ndarray
    idx_u: np.ndarray
    idx_v: np.ndarray

    @property
    def size(self) -> int:
        return self.points.size

    def endpoint_values(self, values):
        """Map grid values to per-sample ``(LU, LV)``, zero where unused."""
        values = np.asarray(values, dtype=float)
        LU = np.where(self.idx_u >= 0, values[np.maximum(self.idx_u, 0)], 0.0) if values.size else np.zeros(self.idx_u.size)
        LV = np.where(self.idx_v >= 0, values[np.maximum(self.idx_v, 0)], 0.0) if values.size else np.zeros(self.idx_v.size)
        return LU, LV


def build_time_grid(data: Dataset) -> TimeGrid:
    uses_u = (data.delta1 == 1) | (data.delta2 == 1)
    uses_v = data.delta1 == 0
    points = np.unique(np.concatenate([data.u[uses_u], data.v[uses_v]]))
    idx_u = np.full(data.n, -1, dtype=np.int64)
    idx_v = np.full(data.n, -1, dtype=np.int64)
    idx_u[uses_u] = np.searchsorted(points, data.u[uses_u])
    idx_v[uses_v] = np.searchsorted(points, data.v[uses_v])
    return TimeGrid(points, idx_u, idx_v)


@dataclass(frozen=True)
class IcmConfig:
    tol: float = 1e-7
    max_iter: int = 500
    max_halvings: int = 30
    value_cap: float = 1e8

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be nonnegative")
        if not (0 < self.value_cap < np.inf):
            raise ValueError("value_cap must be positive and finite")


@dataclass
class IcmResult:
    hazard: StepCumulativeHazard
    loglik: float
    n_iter: int
    converged: bool
    boundary: bool
    history: list = field(default_factory=list)

    def __iter__(self):
        yield self.hazard
        yield self.loglik


def _grid_loglik(data, risks, grid, values):
    LU, LV = grid.endpoint_values(values)
    return loglik(data, risks, LU, LV)


def grad_and_curv_lambda(data: Dataset, risks, values, grid: TimeGrid | None = None):
    """Gradient and floored negative diagonal Hessian of the log-likelihood
    with respect to the baseline values on the grid."""
    grid = build_time_grid(data) if grid is None else grid
    values = np.asarray(values, dtype=float)
    if values.size != grid.size:
        raise DomainError("values must have one entry per grid point")
    LU, LV = grid.endpoint_values(values)
    der = loglik_derivatives(data, risks, LU, LV)
    G = grid.size
    mu = grid.idx_u >= 0
    mv = grid.idx_v >= 0
    grad = (np.bincount(grid.idx_u[mu], weights=der["dLU"][mu], minlength=G)
            + np.bincount(grid.idx_v[mv], weights=der["dLV"][mv], minlength=G))
    hess = (np.bincount(grid.idx_u[mu], weights=der["d2LU"][mu], minlength=G)
            + np.bincount(grid.idx_v[mv], weights=der["d2LV"][mv], minlength=G))
    curv = np.maximum(-hess, CURVATURE_FLOOR)
    return grad, curv


def unbounded_tail_start(data: Dataset, grid: TimeGrid) -> int:
    """First grid index from which every term gains by raising the baseline.

    No right-censored ``v`` and no interval-censored ``u`` sits at or beyond this
    index, so the supremum sends the tail values to infinity.
    """
    penalised = np.concatenate([
        grid.idx_v[data.delta3 == 1],
        grid.idx_u[data.delta2 == 1],
    ])
    return int(penalised.max()) + 1 if penalised.size else 0


def default_init(G: int) -> np.ndarray:
    return np.arange(1, G + 1, dtype=float) / (G + 1)


def icm_profile(data: Dataset, risks, init=None, cfg: IcmConfig | None = None,
                grid: TimeGrid | None = None) -> IcmResult:
    """Maximise the log-likelihood over the baseline with the risks held fixed.

    Returns an :class:`IcmResult`; unpacking it yields ``(hazard, loglik)``.
    The log-likelihood never decreases across accepted iterations.
    """
    cfg = cfg or IcmConfig()
    grid = build_time_grid(data) if grid is None else grid
    risks = np.asarray(risks, dtype=float)
    if risks.shape != (data.n,) or not np.all(np.isfinite(risks)):
        raise DomainError("risks must be a finite vector of length n")
    G = grid.size
    if init is None:
        x = default_init(G)
    else:
        x = np.array(init, dtype=float).ravel()
        if x.size != G:
            raise DomainError(f"init has {x.size} values, grid has {G}")
        if np.any(x < 0) or np.any(np.diff(x) < 0):
            raise DomainError("init must be nonnegative and nondecreasing")
        x = np.minimum(x, cfg.value_cap)
    tail = unbounded_tail_start(data, grid)
    x[tail:] = cfg.value_cap

    ll = _grid_loglik(data, risks, grid, x)
    history = [ll]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        g, c = grad_and_curv_lambda(data, risks, x, grid)
        target = weighted_pava(x + g / c, c)
        target = np.clip(target, 0.0, cfg.value_cap)
        target[tail:] = cfg.value_cap
        direction = target - x
        slope = float(g @ direction)
        if not np.any(direction) or slope <= 0:
            converged = True
            break
        step = 1.0
        accepted = False
        for _ in range(cfg.max_halvings + 1):
            cand = x + step * direction
            # convex combinations of monotone vectors stay monotone; guard rounding
            cand = np.maximum.accumulate(np.clip(cand, 0.0, cfg.value_cap))
            ll_cand = _grid_loglik(data, risks, grid, cand)
            if ll_cand >= ll + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break
        gain = ll_cand - ll
        x, ll = cand, ll_cand
        history.append(ll)
        if gain <= cfg.tol * max(abs(ll), 1e-12):
            converged = True
            break

    boundary = tail < G
    if boundary:
        logger.debug("baseline hit the value cap %.3g; likelihood is unbounded", cfg.value_cap)
    return IcmResult(StepCumulativeHazard(grid.points, x), ll, it, converged, boundary, history)
