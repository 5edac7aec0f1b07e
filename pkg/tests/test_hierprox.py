import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from icnet.hierprox import ProxParams, full_shrinkage_bound, hier_prox, prox_objective
from oracles import prox_oracle_min


def test_prox_worked_example():
    theta, W = hier_prox([1.0], np.array([[2.0], [-0.5]]), ProxParams(0.3, 1.0))
    assert theta[0] == pytest.approx(1.35)
    assert np.allclose(W[:, 0], [1.35, -0.5])


def test_prox_zero_penalty_feasible_input_is_fixed():
    theta = np.array([2.0, -1.0])
    W = np.array([[1.0, 0.5], [-3.0, 0.2]])
    t, w = hier_prox(theta, W, ProxParams(0.0, 10.0))
    assert np.array_equal(t, theta) and np.array_equal(w, W)


def test_prox_large_penalty_kills_everything(rng):
    theta = rng.normal(size=6)
    W = rng.normal(size=(4, 6))
    lam = full_shrinkage_bound(theta, W, 2.0)
    t, w = hier_prox(theta, W, ProxParams(lam, 2.0))
    assert np.all(t == 0) and np.all(w == 0)


def test_prox_matches_oracle(rng):
    for _ in range(100):
        K = int(rng.integers(1, 4))
        M = float(rng.uniform(0.1, 5))
        lam = float(rng.uniform(0, 2))
        theta = rng.normal(size=1) * 2
        W = rng.normal(size=(K, 1)) * 2
        t, w = hier_prox(theta, W, ProxParams(lam, M))
        got = prox_objective(theta[0], W[:, 0], t[0], w[:, 0], ProxParams(lam, M))
        assert got <= prox_oracle_min(theta[0], W[:, 0], M, lam) + 1e-6
        assert np.max(np.abs(w)) <= M * abs(t[0])


def test_prox_invalid_params():
    with pytest.raises(ValueError):
        ProxParams(-1.0, 1.0)
    with pytest.raises(ValueError):
        ProxParams(1.0, 0.0)
    with pytest.raises(ValueError):
        hier_prox([1.0, 2.0], np.zeros((3, 1)), ProxParams(0.1, 1.0))


vals = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5), st.integers(1, 4), st.data(),
       st.floats(0, 10), st.floats(0.05, 20))
def test_prox_feasibility_and_monotone_sparsity(K, d, data, lam, M):
    theta = data.draw(arrays(float, d, elements=vals))
    W = data.draw(arrays(float, (K, d), elements=vals))
    t, w = hier_prox(theta, W, ProxParams(lam, M))
    assert np.all(np.max(np.abs(w), axis=0) <= M * np.abs(t))
    assert np.all(w[:, t == 0] == 0)
    assert np.all(np.sign(t[t != 0]) == np.sign(np.where(theta == 0, 1.0, theta))[t != 0])
    t2, _ = hier_prox(theta, W, ProxParams(lam * 2 + 0.1, M))
    assert np.all((t == 0) <= (t2 == 0))
    assert np.all(np.abs(t2) <= np.abs(t) + 1e-12)
