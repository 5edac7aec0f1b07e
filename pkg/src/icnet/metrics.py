"""Evaluation metrics for interval-censored survival predictions.

The Brier score needs a single time per subject, so each interval is collapsed
to its midpoint ``y = (u + v) / 2`` with event indicator ``gamma = 1 - delta3``;
censoring is handled by inverse weighting with a Kaplan-Meier estimate of the
probability of ``gamma = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, DomainError, GompertzBaseline, StepCumulativeHazard, eval_cumhaz

WEIGHT_FLOOR = 1e-10
WEIGHTINGS = ("time", "uniform")


@dataclass(frozen=True)
class SurrogatePair:
    y: float
    gamma: int


def surrogate_pairs(data: Dataset):
    """Arrays ``(y, gamma)`` for every subject of ``data``."""
    return 0.5 * (data.u + data.v), 1 - data.delta3


def _as_arrays(pairs):
    if isinstance(pairs, Dataset):
        return surrogate_pairs(pairs)
    if isinstance(pairs, tuple) and len(pairs) == 2 and not isinstance(pairs[0], SurrogatePair):
        return np.asarray(pairs[0], dtype=float), np.asarray(pairs[1], dtype=np.int64)
    y = np.array([p.y for p in pairs], dtype=float)
    g = np.array([p.gamma for p in pairs], dtype=np.int64)
    return y, g


@dataclass(frozen=True)
class StepSurvivalEstimate:
    """Right-continuous nonincreasing step function equal to 1 before ``times[0]``."""

    times: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.times, t, side="right") - 1
        out = np.where(k >= 0, self.values[np.maximum(k, 0)] if self.values.size else 1.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def left_limit(self, t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.times, t, side="left") - 1
        out = np.where(k >= 0, self.values[np.maximum(k, 0)] if self.values.size else 1.0, 1.0)
        return float(out) if out.ndim == 0 else out


def km_censoring(pairs) -> StepSurvivalEstimate:
    """Product-limit estimate of P(Y > t) treating ``gamma = 0`` as the event.

    ``pairs`` may be a list of :class:`SurrogatePair`, a ``(y, gamma)`` tuple of
    arrays or a :class:`Dataset`.
    """
    y, gamma = _as_arrays(pairs)
    if y.size == 0:
        raise DomainError("need at least one observation")
    event = gamma == 0
    times = np.unique(y[event])
    if times.size == 0:
        return StepSurvivalEstimate(np.array([]), np.array([]))
    y_sorted = np.sort(y)
    at_risk = y.size - np.searchsorted(y_sorted, times, side="left")
    deaths = np.bincount(np.searchsorted(times, y[event]), minlength=times.size)
    values = np.cumprod(1.0 - deaths / at_risk)
    return StepSurvivalEstimate(times, values)


def brier_t(test, surv_at_t, G: StepSurvivalEstimate, t: float, return_dropped: bool = False):
    """Inverse-probability-of-censoring weighted Brier score at time ``t``.

    ``surv_at_t[i]`` is the predicted survival of subject ``i`` at ``t``.
    Subjects whose weight denominator falls below ``WEIGHT_FLOOR`` are left out.
    """
    y, gamma = _as_arrays(test)
    s = np.asarray(surv_at_t, dtype=float)
    if s.shape != y.shape:
        raise DomainError("need one survival prediction per subject")
    if np.any((s < 0) | (s > 1)):
        raise DomainError("survival predictions must lie in [0, 1]")
    observed = (y <= t) & (gamma == 1)
    surviving = y > t
    G_t = G(t)
    if surviving.any() and G_t < WEIGHT_FLOOR:
        raise DomainError(f"censoring survival is zero at t={t} while subjects are still at risk")
    G_y = G.left_limit(y)
    dropped = observed & (G_y < WEIGHT_FLOOR)
    keep = ~dropped
    contrib = np.zeros_like(s)
    ok = observed & keep
    contrib[ok] = s[ok] ** 2 / G_y[ok]
    if surviving.any():
        contrib[surviving] = (1.0 - s[surviving]) ** 2 / G_t
    n_kept = int(keep.sum())
    value = float(contrib[keep].sum() / n_kept) if n_kept else float("nan")
    return (value, int(dropped.sum())) if return_dropped else value


def brier_curve(test, surv, G: StepSurvivalEstimate, times) -> np.ndarray:
    """Brier score on a time grid; ``surv`` has shape ``(n, len(times))``."""
    surv = np.asarray(surv, dtype=float)
    return np.array([brier_t(test, surv[:, k], G, t) for k, t in enumerate(times)])


@dataclass(frozen=True)
class BrierConfig:
    t1: float
    t2: float
    weighting: str = "time"
    grid_n: int = 100

    def __post_init__(self):
        if not (0 <= self.t1 < self.t2):
            raise DomainError("need 0 <= t1 < t2")
        if self.weighting not in WEIGHTINGS:
            raise DomainError(f"weighting must be one of {WEIGHTINGS}")
        if self.grid_n < 2:
            raise DomainError("grid_n must be at least 2")

    def grid(self) -> np.ndarray:
        return np.linspace(self.t1, self.t2, self.grid_n)


def ibs_limits(data: Dataset, lo: float = 0.05, hi: float = 0.95):
    """Empirical quantiles of all interval endpoints pooled together."""
    merged = np.concatenate([data.u, data.v])
    return float(np.quantile(merged, lo)), float(np.quantile(merged, hi))


def _trapezoid(y, x):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def ibs(times, bs, cfg: BrierConfig) -> float:
    """Integrated Brier score over ``[t1, t2]`` by the trapezoid rule.

    ``weighting="time"`` integrates ``t * BS(t) / t2``; ``"uniform"`` returns
    the average ``1/(t2 - t1) * int BS(t) dt``.
    """
    times = np.asarray(times, dtype=float)
    bs = np.asarray(bs, dtype=float)
    if cfg.t1 >= cfg.t2:
        raise DomainError("need t1 < t2")
    if times.size < 2 or times.shape != bs.shape:
        raise DomainError("need at least two grid points with matching scores")
    if times[0] > cfg.t1 or times[-1] < cfg.t2:
        raise DomainError("grid must cover [t1, t2]")
    inside = (times >= cfg.t1) & (times <= cfg.t2)
    t, b = times[inside], bs[inside]
    if cfg.weighting == "time":
        return _trapezoid(t * b / cfg.t2, t)
    return _trapezoid(b, t) / (cfg.t2 - cfg.t1)


def l2_hazard_error(est: StepCumulativeHazard, truth: GompertzBaseline,
                    t_lo: float, t_hi: float, grid_n: int = 1000) -> float:
    if not t_lo < t_hi:
        raise DomainError("need t_lo < t_hi")
    t = np.linspace(t_lo, t_hi, grid_n)
    diff = np.asarray(eval_cumhaz(est, t)) - truth.cumhaz(t)
    return float(np.sqrt(_trapezoid(diff ** 2, t)))


def r2_risk(pred, truth_m) -> float:
    """Squared Pearson correlation between predicted and true risk scores."""
    x = np.asarray(pred, dtype=float)
    y = np.asarray(truth_m, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise DomainError("need two equal-length vectors with at least two entries")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx, syy = float(xc @ xc), float(yc @ yc)
    if sxx == 0 or syy == 0:
        raise DomainError("R^2 is undefined for a constant vector")
    return float((xc @ yc) ** 2 / (sxx * syy))


def selection_tp_tn(selected, true_support, d: int):
    """True-positive and true-negative rates of a selected feature set."""
    sel = set(int(j) for j in selected)
    true = set(int(j) for j in true_support)
    if any(j < 0 or j >= d for j in sel | true):
        raise DomainError("feature index out of range")
    if not true:
        raise DomainError("true positive rate is undefined for an empty support")
    tp = len(sel & true) / len(true)
    negatives = set(range(d)) - true
    tn = len(negatives - sel) / len(negatives) if negatives else float("nan")
    return tp, tn
