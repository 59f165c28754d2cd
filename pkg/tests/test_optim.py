"""Adam optimizer against a straight-line reference."""

import numpy as np
import pytest

from tapgen.autodiff import Parameter
from tapgen.optim import AdamState, adam_step, zero_grads

from _oracles import reference_adam


def test_matches_reference_trace():
    rng = np.random.default_rng(0)
    grads = rng.normal(size=12)
    p = Parameter(np.zeros(()), "w")
    state = AdamState()
    got = []
    for g in grads:
        p.grad = np.array(g)
        adam_step([p], state, lr=0.01)
        got.append(float(p.data))
    assert np.allclose(got, reference_adam(grads, 0.01), atol=1e-14)


def test_first_step_magnitude():
    # bias correction makes the first update ~lr regardless of grad scale
    # (up to eps, which matters only for vanishing gradients)
    for g in (1e-6, 1.0, 1e6):
        p = Parameter(np.zeros(()), "w")
        p.grad = np.array(g)
        adam_step([p], AdamState(), lr=0.1)
        assert float(p.data) == pytest.approx(-0.1 * g / (g + 1e-8), rel=1e-12)


def test_state_keyed_by_name():
    a = Parameter(np.zeros(2), "a")
    b = Parameter(np.zeros(3), "b")
    state = AdamState()
    a.grad = np.ones(2)
    b.grad = np.ones(3)
    adam_step([a, b], state, lr=0.1)
    assert set(state.m) == {"a", "b"}
    assert state.m["a"].shape == (2,)
    assert state.step == 1


def test_zero_grads():
    p = Parameter(np.zeros(4), "w")
    p.grad = np.ones(4)
    zero_grads([p])
    assert p.grad is None


def test_multistep_array_param():
    rng = np.random.default_rng(3)
    p = Parameter(np.zeros(5), "w")
    state = AdamState()
    per_coord = [[], [], [], [], []]
    gs = rng.normal(size=(7, 5))
    for g in gs:
        p.grad = g.copy()
        adam_step([p], state, lr=0.05)
        for k in range(5):
            per_coord[k].append(p.data[k])
    for k in range(5):
        ref = reference_adam(gs[:, k], 0.05)
        assert np.allclose(per_coord[k], ref, atol=1e-14)
