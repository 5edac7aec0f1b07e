"""Synthetic interval-censored data with a Gompertz baseline.

Covariates are Gaussian with AR(1) correlation ``0.5**|i-j|``. Event times are
drawn by inverting ``H(t) exp(m(z))``, then observed only through a random set
of uniformly placed inspections.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Union

import numpy as np

from .core import Dataset, DomainError, GompertzBaseline

MODELS = ("m1", "m2")
TRUE_SUPPORT = (0, 1, 2, 3)  # z1..z4

RiskModel = Union[str, Callable[[np.ndarray], np.ndarray]]


def ar1_covariance(d: int, rho: float = 0.5) -> np.ndarray:
    idx = np.arange(d)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def _rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def gen_covariates(n: int, d: int, seed=None) -> np.ndarray:
    if n < 1 or d < 1:
        raise DomainError("need n >= 1 and d >= 1")
    L = np.linalg.cholesky(ar1_covariance(d))
    return _rng(seed).standard_normal((n, d)) @ L.T


def _m1(Z):
    return -2 * Z[:, 0] + 5 * Z[:, 1] + 3 * Z[:, 2] - 3 * Z[:, 3]


def _m2(Z):
    z1, z2, z3 = Z[:, 0], Z[:, 1], Z[:, 2]
    return (_m1(Z) + 2 * np.abs(z1 ** 3 - 3 * np.sin(np.pi * z1))
            + 4 * (z1 ** 2 * z3 - np.abs(z2)))


_RISKS = {"m1": _m1, "m2": _m2}


def true_risk(model: RiskModel, z):
    """Ground-truth log relative hazard; ``z`` is one vector or a row matrix."""
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    Z = z.reshape(1, -1) if single else z
    if callable(model):
        out = np.asarray(model(Z), dtype=float)
    else:
        if model not in _RISKS:
            raise DomainError(f"unknown risk model {model!r}; choose from {MODELS}")
        if Z.shape[1] < 4:
            raise DomainError("risk models need at least 4 covariates")
        out = _RISKS[model](Z)
    return float(out[0]) if single else out


def event_time_from_exponential(E, m, baseline: GompertzBaseline):
    """Solve ``H(t) exp(m) = E`` for ``t``."""
    E = np.asarray(E, dtype=float)
    with np.errstate(over="ignore"):
        scaled = E * np.exp(-np.asarray(m, dtype=float))
    return baseline.inverse_cumhaz(scaled)


def gen_event_time(z, model: RiskModel, baseline: GompertzBaseline, rng) -> float:
    E = _rng(rng).exponential()
    return float(event_time_from_exponential(E, true_risk(model, z), baseline))


def gen_event_times(Z, model: RiskModel, baseline: GompertzBaseline, rng) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    E = _rng(rng).exponential(size=Z.shape[0])
    return event_time_from_exponential(E, true_risk(model, Z), baseline)


@dataclass(frozen=True)
class InspectionScheme:
    """``count`` inspections i.i.d. Uniform(0, tau); ``tau=None`` means the 0.95
    quantile of the marginal event time, found by a pilot simulation."""

    count: int = 10
    tau: float | None = None

    def __post_init__(self):
        if self.count < 1:
            raise DomainError("need at least one inspection")
        if self.tau is not None and not self.tau > 0:
            raise DomainError("inspection horizon must be positive")


def _bracket(t, insp):
    """Interval encoding of event times ``t`` given sorted inspections per row."""
    k = insp.shape[1]
    pos = (insp < t[:, None]).sum(axis=1)  # inspections strictly before the event
    rows = np.arange(t.size)
    first, last = insp[:, 0], insp[:, -1]
    left = pos == 0
    right = pos == k
    mid = ~(left | right)
    u = np.where(left, first, np.where(right, last, insp[rows, np.maximum(pos - 1, 0)]))
    v = np.where(left, first, np.where(right, last, insp[rows, np.minimum(pos, k - 1)]))
    return u, v, left.astype(np.int64), mid.astype(np.int64)


def gen_censoring(t_event: float, inspections: InspectionScheme, rng):
    """Observe one event time through sorted Uniform(0, tau) inspections.

    Returns ``(u, v, delta1, delta2)``.
    """
    if t_event < 0:
        raise DomainError("event time must be nonnegative")
    if inspections.tau is None:
        raise DomainError("inspection horizon is not set")
    insp = np.sort(_rng(rng).uniform(0.0, inspections.tau, size=(1, inspections.count)), axis=1)
    u, v, d1, d2 = _bracket(np.array([float(t_event)]), insp)
    return float(u[0]), float(v[0]), int(d1[0]), int(d2[0])


def gen_censoring_batch(t_event, inspections: InspectionScheme, rng):
    t = np.asarray(t_event, dtype=float)
    insp = np.sort(_rng(rng).uniform(0.0, inspections.tau, size=(t.size, inspections.count)), axis=1)
    return _bracket(t, insp)


@lru_cache(maxsize=32)
def pilot_tau(model: str, gamma: float, lam: float, d: int, quantile: float = 0.95,
              n: int = 20000, seed: int = 20240101) -> float:
    """Quantile of the marginal event-time law, by Monte Carlo."""
    rng = np.random.default_rng(seed)
    Z = gen_covariates(n, d, rng)
    T = gen_event_times(Z, model, GompertzBaseline(gamma, lam), rng)
    return float(np.quantile(T, quantile))


@dataclass(frozen=True)
class SimConfig:
    n: int
    d: int = 100
    model: str = "m1"
    baseline: GompertzBaseline = field(default_factory=GompertzBaseline)
    inspections: InspectionScheme = field(default_factory=InspectionScheme)
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be at least 1")
        if self.d < 4:
            raise DomainError("d must be at least 4")
        if self.model not in MODELS:
            raise DomainError(f"unknown risk model {self.model!r}; choose from {MODELS}")

    def horizon(self) -> float:
        if self.inspections.tau is not None:
            return self.inspections.tau
        return pilot_tau(self.model, self.baseline.gamma, self.baseline.lam, self.d)

    def to_dict(self) -> dict:
        return {"n": self.n, "d": self.d, "model": self.model,
                "baseline": {"gamma": self.baseline.gamma, "lam": self.baseline.lam},
                "inspections": {"count": self.inspections.count, "tau": self.horizon()},
                "seed": self.seed}


@dataclass
class SimTruth:
    risks: np.ndarray
    event_times: np.ndarray
    baseline: GompertzBaseline
    support: tuple = TRUE_SUPPORT
    model: str = "m1"

    def to_dict(self, feature_names=None) -> dict:
        names = feature_names or [f"z{j + 1}" for j in range(max(self.support) + 1)]
        return {"model": self.model,
                "baseline": {"gamma": self.baseline.gamma, "lam": self.baseline.lam},
                "support": [names[j] for j in self.support],
                "risks": self.risks.tolist(),
                "event_times": self.event_times.tolist()}


def simulate_study(cfg: SimConfig):
    """Draw one dataset and its ground truth. Same config, same output."""
    tau = cfg.horizon()
    rng = np.random.default_rng(cfg.seed)
    Z = gen_covariates(cfg.n, cfg.d, rng)
    m = true_risk(cfg.model, Z)
    E = rng.exponential(size=cfg.n)
    T = event_time_from_exponential(E, m, cfg.baseline)
    u, v, d1, d2 = gen_censoring_batch(T, InspectionScheme(cfg.inspections.count, tau), rng)
    data = Dataset(u, v, d1, d2, Z)
    return data, SimTruth(m, T, cfg.baseline, TRUE_SUPPORT, cfg.model)
