"""Interval-censored data containers, the Cox survival map and the log-likelihood.

Censoring is encoded by two indicators per subject:

    delta1 = 1   event before the first inspection      (T <= u)
    delta2 = 1   event bracketed by two inspections     (u < T <= v)
    delta3 = 1   event after the last inspection        (T > v)

with ``delta3 = 1 - delta1 - delta2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

PROB_FLOOR = 1e-300
# argument floor for the derivatives of log(1 - exp(-x)), which blow up at 0
_DERIV_FLOOR = 1e-100


class DomainError(ValueError):
    """Raised when an input violates a mathematical precondition."""


@dataclass(frozen=True)
class IntervalSample:
    u: float
    v: float
    delta1: int
    delta2: int
    z: tuple

    def __post_init__(self):
        _check_interval(
            np.array([self.u]), np.array([self.v]),
            np.array([self.delta1]), np.array([self.delta2]),
        )
        if not np.all(np.isfinite(self.z)):
            raise DomainError("covariates must be finite")

    @property
    def delta3(self) -> int:
        return 1 - self.delta1 - self.delta2


def _check_interval(u, v, delta1, delta2):
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise DomainError("interval endpoints must be finite")
    bad = np.flatnonzero((u < 0) | (u > v))
    if bad.size:
        raise DomainError(f"sample {bad[0]}: need 0 <= u <= v, got u={u[bad[0]]}, v={v[bad[0]]}")
    for name, arr in (("delta1", delta1), ("delta2", delta2)):
        if not np.all((arr == 0) | (arr == 1)):
            raise DomainError(f"{name} must be 0 or 1")
    bad = np.flatnonzero(delta1 + delta2 > 1)
    if bad.size:
        raise DomainError(f"sample {bad[0]}: delta1 and delta2 are both set")
    bad = np.flatnonzero((delta2 == 1) & (u == v))
    if bad.size:
        raise DomainError(f"sample {bad[0]}: interval-censored sample needs u < v")


@dataclass
class Dataset:
    """Column-oriented store of ``n`` interval-censored observations.

    ``Z`` holds covariates row-wise, shape ``(n, d)``.
    """

    u: np.ndarray
    v: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray
    Z: np.ndarray
    feature_names: list = field(default=None)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float).ravel()
        self.v = np.asarray(self.v, dtype=float).ravel()
        self.delta1 = np.asarray(self.delta1, dtype=np.int64).ravel()
        self.delta2 = np.asarray(self.delta2, dtype=np.int64).ravel()
        Z = np.asarray(self.Z, dtype=float)
        if Z.ndim == 1:
            Z = Z.reshape(-1, 1)
        self.Z = Z
        n = self.u.size
        if n < 1:
            raise DomainError("dataset must contain at least one sample")
        if not (self.v.size == self.delta1.size == self.delta2.size == Z.shape[0] == n):
            raise DomainError("dataset columns have inconsistent lengths")
        _check_interval(self.u, self.v, self.delta1, self.delta2)
        if not np.all(np.isfinite(Z)):
            raise DomainError("covariates must be finite")
        if self.feature_names is None:
            self.feature_names = [f"z{j + 1}" for j in range(Z.shape[1])]
        elif len(self.feature_names) != Z.shape[1]:
            raise DomainError("feature_names length does not match covariate dimension")
        self.feature_names = list(self.feature_names)

    @property
    def n(self) -> int:
        return self.u.size

    @property
    def d(self) -> int:
        return self.Z.shape[1]

    @property
    def delta3(self) -> np.ndarray:
        return 1 - self.delta1 - self.delta2

    @classmethod
    def from_samples(cls, samples: Sequence[IntervalSample], feature_names=None) -> "Dataset":
        if not samples:
            raise DomainError("dataset must contain at least one sample")
        dims = {len(s.z) for s in samples}
        if len(dims) != 1:
            raise DomainError("samples disagree on covariate dimension")
        return cls(
            u=[s.u for s in samples],
            v=[s.v for s in samples],
            delta1=[s.delta1 for s in samples],
            delta2=[s.delta2 for s in samples],
            Z=np.array([s.z for s in samples], dtype=float),
            feature_names=feature_names,
        )

    def samples(self) -> Iterator[IntervalSample]:
        for i in range(self.n):
            yield IntervalSample(
                float(self.u[i]), float(self.v[i]), int(self.delta1[i]),
                int(self.delta2[i]), tuple(float(x) for x in self.Z[i]),
            )

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.u[idx], self.v[idx], self.delta1[idx], self.delta2[idx],
                       self.Z[idx], self.feature_names)

    def with_covariates(self, Z) -> "Dataset":
        return Dataset(self.u, self.v, self.delta1, self.delta2, Z, self.feature_names)

    @staticmethod
    def concat(parts: Sequence["Dataset"]) -> "Dataset":
        return Dataset(
            np.concatenate([p.u for p in parts]),
            np.concatenate([p.v for p in parts]),
            np.concatenate([p.delta1 for p in parts]),
            np.concatenate([p.delta2 for p in parts]),
            np.vstack([p.Z for p in parts]),
            parts[0].feature_names,
        )

    def equals(self, other: "Dataset") -> bool:
        return (
            self.feature_names == other.feature_names
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.delta1, other.delta1)
            and np.array_equal(self.delta2, other.delta2)
            and np.array_equal(self.Z, other.Z)
        )


@dataclass
class Standardizer:
    """Per-column affine map ``(z - mean) / scale``; constant columns keep scale 1."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, Z) -> "Standardizer":
        Z = np.asarray(Z, dtype=float)
        mean = Z.mean(axis=0)
        scale = Z.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean, scale)

    @classmethod
    def identity(cls, d: int) -> "Standardizer":
        return cls(np.zeros(d), np.ones(d))

    def transform(self, Z) -> np.ndarray:
        return (np.asarray(Z, dtype=float) - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["scale"], dtype=float))


@dataclass(frozen=True)
class StepCumulativeHazard:
    """Right-continuous nondecreasing step function, zero before ``times[0]``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        values = np.asarray(self.values, dtype=float).ravel()
        if times.shape != values.shape:
            raise DomainError("times and values must have the same length")
        if times.size:
            if np.any(np.diff(times) <= 0):
                raise DomainError("times must be strictly increasing")
            if np.any(np.diff(values) < 0) or values[0] < 0:
                raise DomainError("values must be nonnegative and nondecreasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        return eval_cumhaz(self, t)

    def to_dict(self) -> dict:
        return {"times": self.times.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "StepCumulativeHazard":
        return cls(np.asarray(d["times"], dtype=float), np.asarray(d["values"], dtype=float))


def eval_cumhaz(H: StepCumulativeHazard, t):
    """Evaluate ``H`` at ``t`` (scalar or array)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(np.isnan(t_arr)):
        raise DomainError("cumulative hazard is only defined for t >= 0")
    if H.times.size == 0:
        out = np.zeros_like(t_arr)
    else:
        k = np.searchsorted(H.times, t_arr, side="right") - 1
        out = np.where(k >= 0, H.values[np.maximum(k, 0)], 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GompertzBaseline:
    """Gompertz law with hazard ``lam * exp(gamma * t)``."""

    gamma: float = 5.0
    lam: float = 1.0

    def __post_init__(self):
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise DomainError("Gompertz gamma must be positive")
        if not (self.lam > 0 and np.isfinite(self.lam)):
            raise DomainError("Gompertz lam must be positive")

    def cumhaz(self, t):
        return gompertz_cumhaz(self, t)

    def inverse_cumhaz(self, h):
        h = np.asarray(h, dtype=float)
        return np.log1p(self.gamma * h / self.lam) / self.gamma


def gompertz_cumhaz(b: GompertzBaseline, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("cumulative hazard is only defined for t >= 0")
    out = b.lam / b.gamma * np.expm1(b.gamma * t)
    return float(out) if out.ndim == 0 else out


def survival(cumhaz_at_t, risk):
    """Conditional survival ``exp(-H * exp(risk))``."""
    H = np.asarray(cumhaz_at_t, dtype=float)
    if np.any(H < 0):
        raise DomainError("cumulative hazard must be nonnegative")
    out = np.exp(-H * np.exp(risk))
    return float(out) if out.ndim == 0 else out


def _log1mexp(x):
    """log(1 - exp(-x)) for x >= 0, floored at log(PROB_FLOOR)."""
    p = -np.expm1(-x)
    floored = p < PROB_FLOOR
    return np.log(np.maximum(p, PROB_FLOOR)), floored


def loglik_terms(data: Dataset, risks, LU, LV):
    """Per-sample log-likelihood contributions and a mask of floored samples.

    Entries of ``LU`` (``LV``) are ignored for samples that do not use them.
    """
    risks = np.asarray(risks, dtype=float)
    LU = np.asarray(LU, dtype=float)
    LV = np.asarray(LV, dtype=float)
    n = data.n
    if risks.shape != (n,) or LU.shape != (n,) or LV.shape != (n,):
        raise DomainError("risks, LU and LV must all have length n")
    if not np.all(np.isfinite(risks)):
        raise DomainError("risks must be finite")
    d1 = data.delta1 == 1
    d2 = data.delta2 == 1
    d3 = ~(d1 | d2)
    if np.any(LU[d1 | d2] < 0) or np.any(LV[d2 | d3] < 0):
        raise DomainError("cumulative hazard values must be nonnegative")
    bad = np.flatnonzero(d2 & (LU > LV))
    if bad.size:
        raise DomainError(f"sample {bad[0]}: Lambda(U) > Lambda(V)")

    eta = np.exp(risks)
    terms = np.zeros(n)
    flags = np.zeros(n, dtype=bool)

    t1, f1 = _log1mexp(LU[d1] * eta[d1])
    terms[d1] = t1
    flags[d1] = f1

    a = LU[d2] * eta[d2]
    c = (LV[d2] - LU[d2]) * eta[d2]
    t2, f2 = _log1mexp(c)
    terms[d2] = -a + t2
    flags[d2] = f2

    terms[d3] = -LV[d3] * eta[d3]
    return terms, flags


def loglik(data: Dataset, risks, LU, LV, return_flags: bool = False):
    """Interval-censored Cox log-likelihood with ``LU_i = H(u_i)``, ``LV_i = H(v_i)``.

    Log arguments below ``PROB_FLOOR`` are floored and reported through the
    returned mask when ``return_flags`` is set.
    """
    terms, flags = loglik_terms(data, risks, LU, LV)
    total = float(np.sum(terms))
    return (total, flags) if return_flags else total


def _dlog1mexp(x):
    """First and second derivatives of log(1 - exp(-x))."""
    x = np.maximum(x, _DERIV_FLOOR)
    with np.errstate(over="ignore"):
        em1 = np.expm1(x)
        d1 = 1.0 / em1
        d2 = -1.0 / (em1 * -np.expm1(-x))
    return d1, d2


def loglik_derivatives(data: Dataset, risks, LU, LV):
    """Per-sample partial derivatives of the log-likelihood terms.

    Returns a dict with ``dr`` (w.r.t. the risk), ``dLU``, ``dLV`` and the
    second derivatives ``d2LU``, ``d2LV``. Entries not used by a sample are 0.
    """
    risks = np.asarray(risks, dtype=float)
    LU = np.asarray(LU, dtype=float)
    LV = np.asarray(LV, dtype=float)
    n = data.n
    d1 = data.delta1 == 1
    d2 = data.delta2 == 1
    d3 = ~(d1 | d2)
    eta = np.exp(risks)
    out = {k: np.zeros(n) for k in ("dr", "dLU", "dLV", "d2LU", "d2LV")}

    e = eta[d1]
    a = LU[d1] * e
    f1, f2 = _dlog1mexp(a)
    out["dr"][d1] = np.maximum(a, _DERIV_FLOOR) * f1
    out["dLU"][d1] = e * f1
    out["d2LU"][d1] = e * e * f2

    e = eta[d2]
    a = LU[d2] * e
    c = (LV[d2] - LU[d2]) * e
    f1, f2 = _dlog1mexp(c)
    out["dr"][d2] = -a + np.maximum(c, _DERIV_FLOOR) * f1
    out["dLU"][d2] = -e - e * f1
    out["dLV"][d2] = e * f1
    out["d2LU"][d2] = e * e * f2
    out["d2LV"][d2] = e * e * f2

    e = eta[d3]
    out["dr"][d3] = -LV[d3] * e
    out["dLV"][d3] = -e
    return out
