import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from icnet.core import (
    Dataset, DomainError, GompertzBaseline, IntervalSample, StepCumulativeHazard,
    eval_cumhaz, gompertz_cumhaz, loglik, survival,
)
from conftest import random_dataset


def test_eval_cumhaz_examples():
    empty = StepCumulativeHazard([], [])
    assert eval_cumhaz(empty, 1.0) == 0.0
    H = StepCumulativeHazard([1, 2], [0.5, 0.9])
    assert eval_cumhaz(H, 0.5) == 0.0
    assert eval_cumhaz(H, 1.7) == 0.5
    assert eval_cumhaz(H, 1.0) == 0.5  # right-continuous at the jump
    assert eval_cumhaz(H, 2.0) == 0.9
    assert eval_cumhaz(H, 100.0) == 0.9
    with pytest.raises(DomainError):
        eval_cumhaz(H, -0.1)


def test_step_hazard_rejects_bad_input():
    with pytest.raises(DomainError):
        StepCumulativeHazard([1, 1], [0, 1])
    with pytest.raises(DomainError):
        StepCumulativeHazard([1, 2], [1, 0.5])
    with pytest.raises(DomainError):
        StepCumulativeHazard([1], [-0.1])


def test_gompertz():
    b = GompertzBaseline(5, 1)
    assert gompertz_cumhaz(b, 0.0) == 0.0
    # quadrature of 1 * exp(5 s) over [0, 0.2]
    assert gompertz_cumhaz(b, 0.2) == pytest.approx(0.3436563656918091, rel=1e-12)
    with pytest.raises(DomainError):
        GompertzBaseline(5, 0)
    t = np.linspace(0, 1, 50)
    assert np.all(np.diff(b.cumhaz(t)) > 0)
    assert np.allclose(b.inverse_cumhaz(b.cumhaz(t)), t)


def test_survival_examples():
    assert survival(0.0, 3.7) == 1.0
    assert survival(np.log(2), 0.0) == pytest.approx(0.5, abs=1e-15)
    # mpmath: exp(-0.3436 e)
    assert survival(0.3436, 1.0) == pytest.approx(0.3929780047412924, rel=1e-13)
    with pytest.raises(DomainError):
        survival(-1.0, 0.0)


def test_survival_strictly_decreasing():
    H = np.linspace(0.01, 5, 40)
    r = np.linspace(-2, 2, 40)
    assert np.all(np.diff(survival(H, 0.3)) < 0)
    assert np.all(np.diff(survival(0.7, r)) < 0)


def _one(u, v, d1, d2, d=1):
    return Dataset([u], [v], [d1], [d2], np.zeros((1, d)))


def test_loglik_examples():
    data = Dataset([1, 2, 3], [1, 2, 3], [0, 0, 0], [0, 0, 0], np.zeros((3, 2)))
    assert loglik(data, np.array([0.3, -1, 2]), np.zeros(3), np.zeros(3)) == 0.0
    assert loglik(_one(1, 1, 1, 0), [0.0], [np.log(2)], [0.0]) == pytest.approx(-np.log(2), rel=1e-14)
    # mpmath: log(exp(-0.2 e^0.3) - exp(-1.0 e^0.3))
    val = loglik(_one(0.5, 1.5, 0, 1), [0.3], [0.2], [1.0])
    assert val == pytest.approx(-0.6849326417965766, rel=1e-13)


def test_loglik_errors_and_floor():
    with pytest.raises(DomainError):
        loglik(_one(0.5, 1.5, 0, 1), [0.0], [1.0], [0.5])
    with pytest.raises(DomainError):
        loglik(_one(0.5, 1.5, 0, 1), [0.0, 1.0], [1.0], [0.5])
    value, flags = loglik(_one(1, 1, 1, 0), [0.0], [0.0], [0.0], return_flags=True)
    assert np.isfinite(value) and flags[0]


def test_loglik_small_interval_is_accurate():
    # LV - LU tiny: naive difference of exponentials loses all digits
    lv = 1.0 + 1e-12
    val = loglik(_one(0.5, 1.5, 0, 1), [0.0], [1.0], [lv])
    assert val == pytest.approx(-1.0 + np.log(lv - 1.0), rel=1e-9)


def test_loglik_additivity(rng):
    a = random_dataset(rng, 7, 2)
    b = random_dataset(rng, 5, 2)
    ra, rb = rng.normal(size=7), rng.normal(size=5)
    LUa, LVa = rng.uniform(0, 1, 7), rng.uniform(1, 2, 7)
    LUb, LVb = rng.uniform(0, 1, 5), rng.uniform(1, 2, 5)
    whole = loglik(Dataset.concat([a, b]), np.r_[ra, rb], np.r_[LUa, LUb], np.r_[LVa, LVb])
    assert whole == pytest.approx(loglik(a, ra, LUa, LVa) + loglik(b, rb, LUb, LVb), abs=1e-12)


def test_loglik_nonincreasing_in_right_censored_hazard(rng):
    data = random_dataset(rng, 9, 1)
    r = rng.normal(size=9)
    LU, LV = rng.uniform(0, 1, 9), rng.uniform(1, 2, 9)
    base = loglik(data, r, LU, LV)
    for i in np.flatnonzero(data.delta3):
        LV2 = LV.copy()
        LV2[i] += 1e-3
        assert loglik(data, r, LU, LV2) < base


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5), st.floats(-3, 3))
def test_interval_term_is_a_log_probability(lu, gap, r):
    assert loglik(_one(0.5, 1.5, 0, 1), [r], [lu], [lu + gap]) <= 0.0


def test_dataset_validation():
    with pytest.raises(DomainError):
        Dataset([2], [1], [0], [0], [[0.0]])
    with pytest.raises(DomainError):
        Dataset([1], [1], [1], [1], [[0.0]])
    with pytest.raises(DomainError):
        Dataset([1], [1], [0], [1], [[0.0]])
    with pytest.raises(DomainError):
        Dataset([1], [2], [0], [0], [[np.nan]])
    with pytest.raises(DomainError):
        IntervalSample(-1.0, 1.0, 0, 0, (0.0,))


def test_dataset_sample_round_trip(rng):
    data = random_dataset(rng, 6, 3)
    again = Dataset.from_samples(list(data.samples()))
    assert again.equals(data)
    assert all(s.delta1 + s.delta2 + s.delta3 == 1 for s in data.samples())
