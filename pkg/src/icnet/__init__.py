"""Sparse residual Cox networks for interval-censored survival data."""
from .core import (
    Dataset, DomainError, GompertzBaseline, IntervalSample, Standardizer, StepCumulativeHazard,
    eval_cumhaz, loglik, survival,
)
from .hierprox import ProxParams, hier_prox
from .icm import IcmConfig, icm_profile, weighted_pava
from .metrics import BrierConfig, brier_t, ibs, km_censoring, l2_hazard_error, r2_risk, selection_tp_tn
from .risknet import NetConfig, ResidualRiskNet, forward
from .simgen import SimConfig, simulate_study
from .trainer import (
    FitConfig, FittedModel, NumericalError, PathConfig, PathResult, fit, fit_path,
    predict_survival,
)

__version__ = "0.1.0"
