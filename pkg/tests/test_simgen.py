import numpy as np
import pytest
from scipy import stats

from icnet.core import DomainError, GompertzBaseline
from icnet.simgen import (
    InspectionScheme, SimConfig, ar1_covariance, event_time_from_exponential, gen_censoring,
    gen_covariates, gen_event_times, simulate_study, true_risk,
)


def test_risk_models_at_basis_vectors():
    e = np.eye(6)
    assert true_risk("m1", e[1]) == 5.0
    assert true_risk("m1", e[0]) == -2.0
    assert true_risk("m1", np.zeros(6)) == 0.0
    # m2 at e1: -2 + 2|1 - 3 sin(pi)| + 4(0 - 0) = 0 up to sin(pi) rounding
    assert true_risk("m2", e[0]) == pytest.approx(0.0, abs=1e-14)
    assert true_risk("m2", e[1]) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        true_risk("m3", e[0])
    assert true_risk(lambda Z: Z[:, 0] * 2, e[0]) == 2.0


def test_event_time_inversion():
    b = GompertzBaseline(5, 1)
    assert event_time_from_exponential(0.0, 0.0, b) == 0.0
    t = event_time_from_exponential(np.array([0.3, 1.7]), np.array([0.4, -1.0]), b)
    assert np.allclose(b.cumhaz(t) * np.exp([0.4, -1.0]), [0.3, 1.7])


def test_event_times_follow_gompertz_law():
    b = GompertzBaseline(5, 1)
    T = gen_event_times(np.zeros((20000, 1)), lambda Z: np.zeros(Z.shape[0]), b,
                        np.random.default_rng(0))
    ks = stats.kstest(T, lambda t: 1 - np.exp(-b.cumhaz(t))).statistic
    assert ks < 0.015


def test_covariate_correlation():
    Z = gen_covariates(20000, 6, seed=1)
    C = np.corrcoef(Z, rowvar=False)
    assert np.max(np.abs(C - ar1_covariance(6))) < 0.03


def test_censoring_examples():
    scheme = InspectionScheme(count=4, tau=1.0)
    for t in [0.0, 0.2, 0.5, 0.99, 5.0]:
        u, v, d1, d2 = gen_censoring(t, scheme, np.random.default_rng(3))
        if d1:
            assert t <= u and u == v
        elif d2:
            assert u < t <= v
        else:
            assert v < t and u == v
    u, v, d1, d2 = gen_censoring(5.0, scheme, np.random.default_rng(3))
    assert (d1, d2) == (0, 0)
    with pytest.raises(DomainError):
        gen_censoring(-1.0, scheme, np.random.default_rng(3))


def test_simulate_study_is_reproducible_and_mixed():
    cfg = SimConfig(n=400, d=10, seed=7)
    a, ta = simulate_study(cfg)
    b, tb = simulate_study(cfg)
    assert a.equals(b) and np.array_equal(ta.risks, tb.risks)
    assert a.delta1.sum() > 0 and a.delta2.sum() > 0 and a.delta3.sum() > 0
    inside = a.delta2 == 1
    assert np.all((a.u[inside] < ta.event_times[inside]) & (ta.event_times[inside] <= a.v[inside]))
    c, _ = simulate_study(SimConfig(n=400, d=10, seed=8))
    assert not a.equals(c)


def test_sim_config_validation():
    with pytest.raises(DomainError):
        SimConfig(n=0)
    with pytest.raises(DomainError):
        SimConfig(n=10, d=3)
    with pytest.raises(DomainError):
        InspectionScheme(count=0)
