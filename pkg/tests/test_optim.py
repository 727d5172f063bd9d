import numpy as np
import pytest

from dancegen.autodiff import Param
from dancegen.optim import AdamState, adam_step


def make_params(values):
    return {name: Param(name, np.asarray(v, dtype=np.float32)) for name, v in values.items()}


def test_first_step_moves_by_learning_rate():
    params = make_params({"p": [1.0]})
    state = AdamState.for_params(params)
    adam_step(params, {"p": np.array([0.5], dtype=np.float32)}, state)
    # m_hat / (sqrt(v_hat) + eps) ~= sign(g) on the very first step
    delta = 1.0 - params["p"].data[0]
    assert abs(delta - 2e-4) < 1e-6
    assert state.t == 1


def test_zero_gradient_keeps_params():
    params = make_params({"p": [[0.3, -0.7]], "q": [2.0]})
    state = AdamState.for_params(params)
    before = {k: p.data.copy() for k, p in params.items()}
    adam_step(params, {k: np.zeros_like(p.data) for k, p in params.items()}, state)
    for k in params:
        assert np.array_equal(params[k].data, before[k])
    assert state.t == 1


def test_missing_gradient_raises():
    params = make_params({"p": [1.0], "q": [1.0]})
    state = AdamState.for_params(params)
    with pytest.raises(KeyError):
        adam_step(params, {"p": np.zeros(1, dtype=np.float32)}, state)


def test_gradient_shape_checked():
    params = make_params({"p": [1.0, 2.0]})
    state = AdamState.for_params(params)
    with pytest.raises(KeyError):
        adam_step(params, {"p": np.zeros((2, 1), dtype=np.float32)}, state)


def test_trajectories_are_deterministic():
    def run():
        params = make_params({"a": np.zeros((3, 2)), "b": np.ones(4)})
        state = AdamState.for_params(params)
        rng = np.random.default_rng(123)
        trace = []
        for _ in range(25):
            grads = {k: rng.normal(size=p.data.shape).astype(np.float32)
                     for k, p in params.items()}
            adam_step(params, grads, state)
            trace.append({k: p.data.copy() for k, p in params.items()})
        return trace

    t1, t2 = run(), run()
    for s1, s2 in zip(t1, t2):
        for k in s1:
            assert np.array_equal(s1[k], s2[k])


def test_second_moment_nonnegative_and_step_counts():
    params = make_params({"p": np.linspace(-1, 1, 8)})
    state = AdamState.for_params(params)
    rng = np.random.default_rng(5)
    for i in range(10):
        adam_step(params, {"p": rng.normal(size=8).astype(np.float32)}, state)
        assert state.t == i + 1
        assert np.all(state.v["p"] >= 0)
