"""Alternating proximal-gradient / ICM fitting and the warm-started lambda path.

Each outer iteration runs ``B`` full-batch gradient epochs on the network with
the baseline frozen, applying the hierarchical proximal operator after every
step, and then re-profiles the baseline with ICM at the new risk scores.

The network is trained on the per-sample mean negative log-likelihood, so the
penalty ``lambda`` is on the same per-sample scale regardless of ``n``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Dataset, DomainError, Standardizer, StepCumulativeHazard, eval_cumhaz, loglik
from .hierprox import ProxParams, hier_prox
from .icm import IcmConfig, build_time_grid, icm_profile
from .metrics import BrierConfig, brier_curve, ibs, ibs_limits, km_censoring, surrogate_pairs
from .risknet import NetConfig, ResidualRiskNet, forward, gradient_step, loss_and_grad

logger = logging.getLogger(__name__)


MAX_BACKOFFS = 40


class NumericalError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class FitConfig:
    epochs_B: int = 50
    outer_iters_K: int = 20
    learning_rate_alpha: float = 1e-2
    hierarchy_M: float = 10.0
    penalty_lambda: float = 0.0
    net: NetConfig = field(default_factory=NetConfig)
    icm: IcmConfig = field(default_factory=IcmConfig)
    seed: int = 0
    early_stop_tol: float = 1e-8

    def __post_init__(self):
        if self.outer_iters_K < 1:
            raise ValueError("outer_iters_K must be at least 1")
        if self.epochs_B < 0:
            raise ValueError("epochs_B must be nonnegative")
        if not self.learning_rate_alpha > 0:
            raise ValueError("learning_rate_alpha must be positive")
        if not self.hierarchy_M > 0:
            raise ValueError("hierarchy_M must be positive")
        if not self.penalty_lambda >= 0:
            raise ValueError("penalty_lambda must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "epochs_B": self.epochs_B, "outer_iters_K": self.outer_iters_K,
            "learning_rate_alpha": self.learning_rate_alpha, "hierarchy_M": self.hierarchy_M,
            "penalty_lambda": self.penalty_lambda, "net": self.net.to_dict(),
            "icm": {"tol": self.icm.tol, "max_iter": self.icm.max_iter,
                    "max_halvings": self.icm.max_halvings, "value_cap": self.icm.value_cap},
            "seed": self.seed, "early_stop_tol": self.early_stop_tol,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        d = dict(d)
        net = NetConfig(**d.pop("net", {}))
        icm = IcmConfig(**d.pop("icm", {}))
        return cls(net=net, icm=icm, **d)


@dataclass
class FittedModel:
    """Estimated ``(baseline, theta, W)``.

    ``baseline`` is the cumulative hazard of a subject whose raw covariates are
    all zero; ``risk_offset`` is the network output at that point, so relative
    risks are ``forward(z) - risk_offset``.
    """

    net: ResidualRiskNet
    baseline: StepCumulativeHazard
    standardization: Standardizer
    risk_offset: float
    final_loglik: float
    penalty_lambda: float
    hierarchy_M: float
    feature_names: list
    boundary: bool = False
    history: list = field(default_factory=list)

    @property
    def selected_features(self) -> list:
        return [int(j) for j in np.flatnonzero(self.net.theta != 0)]

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.net.theta))

    def hierarchy_feasible(self) -> bool:
        return hierarchy_feasible(self.net, self.hierarchy_M)

    def raw_baseline_on(self, times) -> np.ndarray:
        """Baseline at network output 0 (the scale the likelihood works on)."""
        return np.asarray(eval_cumhaz(self.baseline, times)) * np.exp(-self.risk_offset)


def hierarchy_feasible(net: ResidualRiskNet, M: float) -> bool:
    W1 = net.W1
    return bool(np.all(np.max(np.abs(W1), axis=0) <= M * np.abs(net.theta)))


def _reference_point(std: Standardizer) -> np.ndarray:
    return std.transform(np.zeros((1, std.mean.size)))


def _finish(net, grid, values, std, ll, cfg, names, boundary, history) -> FittedModel:
    offset = float(forward(net, _reference_point(std))[0])
    baseline = StepCumulativeHazard(grid.points, values * np.exp(offset))
    return FittedModel(net, baseline, std, offset, ll, cfg.penalty_lambda, cfg.hierarchy_M,
                       list(names), boundary, history)


def _raise_nonfinite(net, work, k, b, what="non-finite loss"):
    with np.errstate(all="ignore"):
        eta = np.exp(forward(net, work.Z))
    bad = np.flatnonzero(~np.isfinite(eta))
    where = f" (sample {bad[0]})" if bad.size else ""
    raise NumericalError(f"{what} at outer iteration {k}, epoch {b}{where}")


def fit(data: Dataset, cfg: FitConfig | None = None, warm_start: FittedModel | None = None,
        standardizer: Standardizer | None = None) -> FittedModel:
    """Fit the sparse residual Cox model to interval-censored ``data``.

    ``warm_start`` seeds the network, baseline and covariate scaling from a
    previous fit (used along the lambda path).
    """
    cfg = cfg or FitConfig()
    if np.all(data.delta3 == 1):
        logger.warning("all samples are right-censored: baseline is zero, risks unidentifiable")
    if warm_start is not None:
        std = warm_start.standardization
        net = warm_start.net.copy()
    else:
        std = standardizer or Standardizer.fit(data.Z)
        net = ResidualRiskNet.init(data.d, cfg.net)
    if net.d != data.d:
        raise DomainError("warm start has a different covariate dimension")
    work = data.with_covariates(std.transform(data.Z))
    grid = build_time_grid(work)
    init = None
    if warm_start is not None:
        init = np.maximum.accumulate(warm_start.raw_baseline_on(grid.points))

    n = work.n
    alpha, lam, M = cfg.learning_rate_alpha, cfg.penalty_lambda, cfg.hierarchy_M
    prox = ProxParams(alpha * lam, M)

    risks = forward(net, work.Z)
    res = icm_profile(work, risks, init, cfg.icm, grid)
    values, ll, boundary = res.hazard.values, res.loglik, res.boundary
    history = [{"outer": 0, "loglik_before_icm": ll, "loglik": ll,
                "objective": -ll / n + lam * float(np.abs(net.theta).sum())}]

    backoffs = 0
    for k in range(1, cfg.outer_iters_K + 1):
        LU, LV = grid.endpoint_values(values)
        prev = None
        for b in range(1, cfg.epochs_B + 1):
            with np.errstate(over="ignore", invalid="ignore"):
                loss, g_theta, g_layers = loss_and_grad(net, work, LU, LV, normalize=True)
            F = loss + lam * float(np.abs(net.theta).sum())
            if prev is not None and not F <= prev[0] + abs(prev[0]):
                # the fixed step overshot: undo it and halve the rate for the rest of this fit
                F, net, loss, g_theta, g_layers = prev
                alpha *= 0.5
                prox = ProxParams(alpha * lam, M)
                backoffs += 1
                if backoffs > MAX_BACKOFFS:
                    _raise_nonfinite(net, work, k, b, "training keeps diverging")
                logger.info("step diverged at outer iteration %d, epoch %d; rate now %.3g", k, b, alpha)
            elif not np.isfinite(loss):
                _raise_nonfinite(net, work, k, b)
            prev = (F, net, loss, g_theta, g_layers)
            net = gradient_step(net, g_theta, g_layers, alpha)
            theta, W1 = hier_prox(net.theta, net.W1, prox)
            net = net.with_first_layer(theta, W1)
            if not hierarchy_feasible(net, M):
                raise NumericalError(f"hierarchy constraint violated at outer iteration {k}, epoch {b}")
        new_risks = forward(net, work.Z)
        if not np.all(np.isfinite(new_risks)):
            raise NumericalError(f"non-finite risk scores after outer iteration {k}")
        ll_before = loglik(work, new_risks, LU, LV)
        # unchanged risks: the current baseline already is their profile
        if not np.array_equal(new_risks, risks):
            risks = new_risks
            res = icm_profile(work, risks, values, cfg.icm, grid)
            values, ll = res.hazard.values, res.loglik
            boundary = boundary or res.boundary
        obj = -ll / n + lam * float(np.abs(net.theta).sum())
        history.append({"outer": k, "loglik_before_icm": ll_before, "loglik": ll, "objective": obj,
                        "rate": alpha})
        if abs(history[-2]["objective"] - obj) < cfg.early_stop_tol:
            break

    if boundary:
        logger.warning("baseline estimate reached the value cap")
    return _finish(net, grid, values, std, ll, cfg, data.feature_names, boundary, history)


def relative_risk(model: FittedModel, Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    single = Z.ndim == 1
    Zs = model.standardization.transform(Z.reshape(1, -1) if single else Z)
    r = forward(model.net, Zs) - model.risk_offset
    return r[0] if single else r


def predict_survival(model: FittedModel, z, times) -> np.ndarray:
    """``S(t | z)`` for one covariate vector (1-d result) or a row matrix
    (shape ``(n, len(times))``)."""
    times = np.asarray(times, dtype=float).ravel()
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    Z = z.reshape(1, -1) if single else z
    if Z.shape[1] != model.net.d:
        raise DomainError(f"covariates have {Z.shape[1]} columns, model expects {model.net.d}")
    H = np.asarray(eval_cumhaz(model.baseline, times), dtype=float)
    rel = relative_risk(model, Z)
    S = np.exp(-np.outer(np.exp(rel), H))
    return S[0] if single else S


def null_lambda(data: Dataset, model: FittedModel) -> float:
    """Penalty above which the all-inactive network is a fixed point of one
    proximal-gradient step, evaluated with the model's hidden layers."""
    std = model.standardization
    work = data.with_covariates(std.transform(data.Z))
    W1 = np.zeros_like(model.net.W1)
    net = model.net.with_first_layer(np.zeros(data.d), W1)
    grid = build_time_grid(work)
    risks = forward(net, work.Z)
    res = icm_profile(work, risks, None, IcmConfig(), grid)
    LU, LV = grid.endpoint_values(res.hazard.values)
    _, g_theta, g_layers = loss_and_grad(net, work, LU, LV, normalize=True)
    return float(np.max(np.abs(g_theta) + model.hierarchy_M * np.abs(g_layers[0][0]).sum(axis=0)))


@dataclass(frozen=True)
class PathConfig:
    lambda_start_factor: float = 1e-2
    multiplier: float = 1.05
    val_fraction: float = 0.2
    max_path_length: int = 400
    min_active_fraction: float = 0.95
    max_bisections: int = 12
    weighting: str = "time"
    ibs_grid_n: int = 100
    path_cfg: FitConfig | None = None

    def __post_init__(self):
        if not 0 < self.val_fraction <= 0.5:
            raise ValueError("val_fraction must lie in (0, 0.5]")
        if not self.multiplier > 1:
            raise ValueError("multiplier must exceed 1")
        if not self.lambda_start_factor > 0:
            raise ValueError("lambda_start_factor must be positive")


@dataclass
class PathResult:
    lambdas: list
    models: list
    val_ibs: list
    best_index: int
    train_loglik: list
    n_active: list
    train_idx: np.ndarray
    val_idx: np.ndarray
    ibs_limits: tuple

    @property
    def best(self) -> FittedModel:
        return self.models[self.best_index]

    def rows(self) -> list:
        return [{"lambda": lam, "n_active": na, "train_loglik": ll, "val_ibs": v}
                for lam, na, ll, v in zip(self.lambdas, self.n_active, self.train_loglik, self.val_ibs)]


def stratified_split(data: Dataset, val_fraction: float, seed: int):
    """Seeded train/validation split keeping the censoring-type mix."""
    rng = np.random.default_rng(seed)
    kind = data.delta1 * 1 + data.delta2 * 2  # 1, 2, or 0 for right-censored
    val = []
    for c in (1, 2, 0):
        idx = np.flatnonzero(kind == c)
        idx = idx[rng.permutation(idx.size)]
        val.append(idx[: int(round(val_fraction * idx.size))])
    val_idx = np.sort(np.concatenate(val))
    if val_idx.size == 0 or val_idx.size == data.n:
        raise DomainError("dataset too small for a train/validation split")
    train_idx = np.setdiff1d(np.arange(data.n), val_idx)
    return train_idx, val_idx


class ValidationIBS:
    """Validation-split integrated Brier score with censoring weights from the
    training split."""

    def __init__(self, train: Dataset, val: Dataset, weighting: str = "time", grid_n: int = 100):
        y, gamma = surrogate_pairs(val)
        if not np.any(gamma == 1):
            raise DomainError("validation split has no informative (event-bracketing) samples")
        self.val = val
        self.G = km_censoring(train)
        t1, t2 = ibs_limits(val)
        self.cfg = BrierConfig(t1, t2, weighting, grid_n)
        self.times = self.cfg.grid()

    def __call__(self, model: FittedModel) -> float:
        S = predict_survival(model, self.val.Z, self.times)
        return ibs(self.times, brier_curve(self.val, S, self.G, self.times), self.cfg)


def fit_path(data: Dataset, cfg: FitConfig | None = None, path: PathConfig | None = None) -> PathResult:
    """Dense-to-sparse warm-started path with validation-IBS model selection.

    ``cfg`` drives the first (dense) fits; ``path.path_cfg``, when given, drives
    the warm-started fits further along the path.
    """
    cfg = cfg or FitConfig()
    path = path or PathConfig()
    step_cfg = path.path_cfg or cfg
    train_idx, val_idx = stratified_split(data, path.val_fraction, cfg.seed)
    train, val = data.subset(train_idx), data.subset(val_idx)
    scorer = ValidationIBS(train, val, path.weighting, path.ibs_grid_n)
    std = Standardizer.fit(train.Z)

    dense = fit(train, replace(cfg, penalty_lambda=0.0), standardizer=std)
    lam_null = null_lambda(train, dense)
    lam0 = path.lambda_start_factor * lam_null
    need = int(np.ceil(path.min_active_fraction * train.d))
    model = fit(train, replace(cfg, penalty_lambda=lam0), warm_start=dense)
    for _ in range(path.max_bisections):
        if model.n_active >= need:
            break
        lam0 *= 0.5
        model = fit(train, replace(cfg, penalty_lambda=lam0), warm_start=dense)
    logger.info("path starts at lambda=%.4g with %d active features", lam0, model.n_active)

    lambdas, models, scores = [lam0], [model], [scorer(model)]
    lam = lam0
    while model.n_active > 0 and len(lambdas) < path.max_path_length:
        lam *= path.multiplier
        model = fit(train, replace(step_cfg, penalty_lambda=lam), warm_start=model)
        lambdas.append(lam)
        models.append(model)
        scores.append(scorer(model))
        logger.debug("lambda=%.4g active=%d val_ibs=%.4f", lam, model.n_active, scores[-1])

    scores_arr = np.asarray(scores)
    best = int(np.flatnonzero(scores_arr == np.nanmin(scores_arr))[-1])
    return PathResult(
        lambdas, models, scores, best,
        [m.final_loglik for m in models], [m.n_active for m in models],
        train_idx, val_idx, (scorer.cfg.t1, scorer.cfg.t2),
    )
