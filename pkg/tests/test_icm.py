import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from icnet.core import Dataset, DomainError, loglik
from icnet.icm import (
    IcmConfig, build_time_grid, grad_and_curv_lambda, icm_profile, weighted_pava,
)
from conftest import random_dataset
from oracles import brute_force_isotonic


def test_pava_examples():
    assert np.allclose(weighted_pava([1, 3, 2], [1, 1, 1]), [1, 2.5, 2.5])
    assert np.allclose(weighted_pava([3, 2, 1], [1, 1, 1]), [2, 2, 2])
    assert np.allclose(weighted_pava([3, 1], [3, 1]), [2.5, 2.5])
    with pytest.raises(ValueError):
        weighted_pava([], [])
    with pytest.raises(ValueError):
        weighted_pava([1, 2], [1, 0])
    with pytest.raises(ValueError):
        weighted_pava([1, 2], [1])


def test_pava_matches_brute_force(rng):
    for _ in range(200):
        n = int(rng.integers(1, 9))
        y = rng.normal(size=n) * 3
        w = rng.uniform(0.05, 5, size=n)
        expected, _ = brute_force_isotonic(y, w)
        assert np.max(np.abs(weighted_pava(y, w) - expected)) < 1e-8


finite = st.floats(-1e3, 1e3, allow_nan=False)
positive = st.floats(1e-3, 1e3)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 30).flatmap(
    lambda n: st.tuples(arrays(float, n, elements=finite), arrays(float, n, elements=positive))))
def test_pava_properties(yw):
    y, w = yw
    x = weighted_pava(y, w)
    assert np.all(np.diff(x) >= -1e-9 * (1 + np.abs(x[1:])))
    assert np.allclose(weighted_pava(x, w), x, rtol=1e-12, atol=1e-9)
    # weighted mean is preserved by pooling
    assert np.dot(w, x) == pytest.approx(np.dot(w, y), rel=1e-9, abs=1e-6)


def _icm_data(kinds, times=None):
    n = len(kinds)
    t = np.ones(n) if times is None else np.asarray(times, float)
    d1 = np.array([k == 1 for k in kinds], int)
    return Dataset(t, t, d1, np.zeros(n, int), np.zeros((n, 1)))


def test_icm_analytic_targets():
    res = icm_profile(_icm_data([1, 3]), np.zeros(2))
    assert res.hazard(1.0) == pytest.approx(np.log(2), abs=1e-4)
    res = icm_profile(_icm_data([1, 1, 3]), np.zeros(3))
    assert res.hazard(1.0) == pytest.approx(np.log(3), abs=1e-4)
    assert res.converged and not res.boundary


def test_icm_all_right_censored_is_zero():
    res = icm_profile(_icm_data([3, 3], times=[1.0, 2.0]), np.zeros(2))
    assert np.all(res.hazard.values == 0.0)
    assert res.loglik == 0.0


def test_icm_all_left_censored_hits_cap():
    res = icm_profile(_icm_data([1, 1], times=[1.0, 2.0]), np.zeros(2))
    assert res.boundary
    assert np.all(res.hazard.values == IcmConfig().value_cap)


def test_icm_monotone_history_and_stationarity(rng):
    for _ in range(10):
        data = random_dataset(rng, 25, 2)
        risks = rng.normal(size=25) * 0.5
        res = icm_profile(data, risks, cfg=IcmConfig(tol=1e-12, max_iter=5000))
        hist = np.array(res.history)
        assert np.all(np.diff(hist) >= 0)
        assert np.all(np.diff(res.hazard.values) >= 0) and res.hazard.values[0] >= 0
        assert res.loglik == pytest.approx(
            loglik(data, risks, *build_time_grid(data).endpoint_values(res.hazard.values)))
        if res.boundary:
            continue
        # KKT for monotone maximisation: no feasible ascent along cumulative directions
        g, _ = grad_and_curv_lambda(data, risks, res.hazard.values)
        tail_sums = np.cumsum(g[::-1])[::-1]
        assert np.all(tail_sums <= 1e-4)


def test_icm_warm_start_does_not_change_maximum(rng):
    data = random_dataset(rng, 30, 1)
    risks = rng.normal(size=30) * 0.3
    cold = icm_profile(data, risks, cfg=IcmConfig(tol=1e-12, max_iter=5000))
    warm = icm_profile(data, risks, init=cold.hazard.values * 1.5,
                       cfg=IcmConfig(tol=1e-12, max_iter=5000))
    assert warm.loglik == pytest.approx(cold.loglik, abs=1e-6)


def test_icm_permutation_invariance(rng):
    data = random_dataset(rng, 20, 2)
    risks = rng.normal(size=20) * 0.3
    perm = rng.permutation(20)
    a = icm_profile(data, risks, cfg=IcmConfig(tol=1e-12, max_iter=5000))
    b = icm_profile(data.subset(perm), risks[perm], cfg=IcmConfig(tol=1e-12, max_iter=5000))
    assert a.loglik == pytest.approx(b.loglik, abs=1e-8)
    assert np.allclose(a.hazard.values, b.hazard.values, atol=1e-4)


def test_icm_input_validation(rng):
    data = random_dataset(rng, 5, 1)
    with pytest.raises(DomainError):
        icm_profile(data, np.zeros(4))
    with pytest.raises(DomainError):
        icm_profile(data, np.full(5, np.nan))
    G = build_time_grid(data).size
    with pytest.raises(DomainError):
        icm_profile(data, np.zeros(5), init=np.linspace(1, 0, G))
