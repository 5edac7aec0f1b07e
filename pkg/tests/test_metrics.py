import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from icnet.core import DomainError, GompertzBaseline, StepCumulativeHazard
from icnet.metrics import (
    BrierConfig, SurrogatePair, brier_t, ibs, km_censoring, l2_hazard_error, r2_risk,
    selection_tp_tn,
)


def test_km_censoring_examples():
    G = km_censoring([SurrogatePair(1.0, 0), SurrogatePair(2.0, 1)])
    assert G(0.5) == 1.0
    assert G(1.0) == 0.5
    assert G(5.0) == 0.5
    assert G.left_limit(1.0) == 1.0
    # hand computation: at risk 4 at t=1 (one censored), 2 at t=3 (one censored)
    y = np.array([1.0, 2.0, 3.0, 4.0])
    g = np.array([0, 1, 0, 1])
    G = km_censoring((y, g))
    assert G(1.0) == pytest.approx(0.75)
    assert G(3.0) == pytest.approx(0.375)
    assert np.all(km_censoring((y, np.ones(4, int)))(y) == 1.0)


def test_km_is_nonincreasing(rng):
    y = rng.exponential(size=50)
    g = rng.integers(0, 2, size=50)
    G = km_censoring((y, g))
    vals = G(np.linspace(0, 5, 200))
    assert np.all(np.diff(vals) <= 0) and np.all((vals >= 0) & (vals <= 1))


def test_brier_examples():
    G = km_censoring((np.array([1.0, 2.0]), np.array([1, 1])))
    test = (np.array([1.0, 2.0]), np.array([1, 1]))
    assert brier_t(test, [0.5, 0.5], G, 1.5) == 0.25
    assert brier_t(test, [0.0, 1.0], G, 1.5) == 0.0
    with pytest.raises(DomainError):
        brier_t(test, [0.5, 1.5], G, 1.5)


def test_brier_drops_zero_weight_subjects():
    # censoring survival vanishes just before y=3 for the only later subject
    train = (np.array([1.0, 2.0]), np.array([1, 0]))
    G = km_censoring(train)
    assert G(2.0) == 0.0
    test = (np.array([1.0, 3.0]), np.array([1, 1]))
    value, dropped = brier_t(test, [0.2, 0.2], G, 3.5, return_dropped=True)
    assert dropped == 1
    assert value == pytest.approx(0.04)
    with pytest.raises(DomainError):
        brier_t((np.array([4.0]), np.array([1])), [0.5], G, 3.5)


def test_ibs_constant_scores():
    c, t1, t2 = 0.3, 0.2, 1.7
    cfg = BrierConfig(t1, t2)
    grid = cfg.grid()
    assert ibs(grid, np.full(grid.size, c), cfg) == pytest.approx(c * (t2**2 - t1**2) / (2 * t2), abs=1e-12)
    uni = BrierConfig(t1, t2, weighting="uniform")
    assert ibs(grid, np.full(grid.size, c), uni) == pytest.approx(c, abs=1e-12)
    with pytest.raises(DomainError):
        ibs(grid[1:], np.full(grid.size - 1, c), cfg)
    with pytest.raises(DomainError):
        BrierConfig(1.0, 1.0)


def test_l2_hazard_error_oracle():
    zero = StepCumulativeHazard([], [])
    # closed-form integral of ((e^{5t} - 1)/5)^2 on [0, 0.5]
    val = l2_hazard_error(zero, GompertzBaseline(5, 1), 0.0, 0.5, grid_n=20001)
    assert val == pytest.approx(0.6563023183252142, rel=1e-7)
    b = GompertzBaseline(5, 1)
    t = np.linspace(0, 1, 4001)
    exact = StepCumulativeHazard(t, b.cumhaz(t))
    assert l2_hazard_error(exact, b, 0.0, 1.0, grid_n=4001) == 0.0


def test_r2_examples():
    assert r2_risk([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert r2_risk([1, 2, 3], [-1, -2, -3]) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        r2_risk([1, 1, 1], [1, 2, 3])


@settings(max_examples=100, deadline=None)
@given(arrays(float, 12, elements=st.floats(-10, 10)), arrays(float, 12, elements=st.floats(-10, 10)),
       st.floats(0.1, 10) | st.floats(-10, -0.1), st.floats(-10, 10))
def test_r2_affine_invariance(x, y, a, b):
    if np.ptp(x) < 1e-3 or np.ptp(y) < 1e-3:
        return
    assert abs(r2_risk(a * x + b, y) - r2_risk(x, y)) <= 1e-12


def test_selection_examples():
    true = {0, 1, 2, 3}
    assert selection_tp_tn(true, true, 100) == (1.0, 1.0)
    assert selection_tp_tn(range(100), true, 100) == (1.0, 0.0)
    tp, tn = selection_tp_tn({0, 1, 6}, true, 100)
    assert tp == 0.5 and tn == pytest.approx(95 / 96)
    with pytest.raises(DomainError):
        selection_tp_tn({100}, true, 100)
