"""Relation head: interval sampling, attention branches, confidence maps."""

import numpy as np
import pytest

from tapgen import autodiff as ad
from tapgen.autodiff import Tensor, no_grad
from tapgen.grid import valid_cell_mask
from tapgen.relation import (
    EXTENSION_RATIO,
    RelationHead,
    build_sample_plan,
)
from tapgen.rng import make_rng

from _oracles import (
    channel_attention_oracle,
    position_attention_oracle,
    softmax_rows_oracle,
)


def naive_cell_samples(feat, j, i, t, n):
    """Loop interpolation of one cell's n sample points; (C, n)."""
    ext = EXTENSION_RATIO * j
    lo, hi = i - ext, i + j + ext
    out = np.zeros((feat.shape[0], n))
    for k in range(n):
        pos = lo + (hi - lo) * k / (n - 1)
        left = int(np.floor(pos))
        frac = pos - left
        acc = np.zeros(feat.shape[0])
        if 0 <= left <= t - 1:
            acc += (1 - frac) * feat[:, left]
        if 0 <= left + 1 <= t - 1:
            acc += frac * feat[:, left + 1]
        out[:, k] = acc
    return out


@pytest.mark.parametrize("seed", range(4))
def test_sample_plan_matches_naive(seed):
    d, t, n = 6, 12, 8
    rng = np.random.default_rng(seed)
    feat = rng.normal(size=(3, t))
    plan = build_sample_plan(d, t, n)
    with no_grad():
        samp = ad.linear_sample(Tensor(feat), plan.i0, plan.i1, plan.w0, plan.w1)
    grid = samp.data.reshape(3, d, t, n)
    mask = valid_cell_mask(d, t)
    for j in range(d):
        for i in range(t):
            want = naive_cell_samples(feat, j, i, t, n) if mask[j, i] else 0.0
            assert np.allclose(grid[:, j, i, :], want, atol=1e-12), (j, i)


def test_sample_plan_zero_outside_window():
    plan = build_sample_plan(6, 8, 5)
    w = (plan.w0 + plan.w1).reshape(6, 8, 5)
    # cell (4, 0) extends to -1.0: the first sample point has no in-range
    # neighbour left and zero fractional weight right, so it contributes 0
    assert w[4, 0, 0] == 0.0
    # a point half a snippet outside keeps only its in-range neighbour
    assert w[2, 0, 0] == 0.5
    # invalid cells carry no weight at all
    assert np.all(w[0] == 0.0)
    assert np.all(w[3, 5:] == 0.0)


def test_sample_plan_interior_weights_sum_to_one():
    plan = build_sample_plan(4, 16, 5)
    w = (plan.w0 + plan.w1).reshape(4, 16, 5)
    # interior cell whose extension stays inside [0, 15]
    assert np.allclose(w[2, 4], 1.0)


def make_head(seed=0, d=4, t=12, h=8):
    return RelationHead(
        5, d, t, make_rng(seed, "init"), reduced_channels=3, hidden_width=h, n_points=6
    )


def test_output_shapes_and_mask():
    d, t = 4, 12
    head = make_head(d=d, t=t)
    feat = Tensor(np.random.default_rng(0).normal(size=(5, t)))
    with no_grad():
        cls_map, reg_map, pos_attn, chan_attn = head(feat)
    assert cls_map.data.shape == (d, t)
    assert reg_map.data.shape == (d, t)
    assert pos_attn.data.shape == (d * t, d * t)
    assert chan_attn.data.shape == (8, 8)
    mask = valid_cell_mask(d, t)
    assert np.all(cls_map.data[~mask] == 0)
    assert np.all(reg_map.data[~mask] == 0)
    valid = cls_map.data[mask]
    assert np.all((valid > 0) & (valid < 1))


@pytest.mark.parametrize("seed", range(5))
def test_attention_rows_sum_to_one(seed):
    head = make_head(seed=seed)
    feat = Tensor(np.random.default_rng(seed).normal(size=(5, 12)))
    with no_grad():
        _, _, pos_attn, chan_attn = head(feat)
    assert np.max(np.abs(pos_attn.data.sum(axis=1) - 1.0)) < 1e-12
    assert np.max(np.abs(chan_attn.data.sum(axis=1) - 1.0)) < 1e-12


def test_position_attention_matches_oracle():
    head = make_head(seed=3)
    x = np.random.default_rng(3).normal(size=(8, 12))
    with no_grad():
        out, attn = head.position_attention(Tensor(x))
    want_out, want_attn = position_attention_oracle(
        x,
        head.wa.data,
        head.ba.data,
        head.wb.data,
        head.bb.data,
        head.wv.data,
        head.bv.data,
    )
    assert np.max(np.abs(attn.data - want_attn)) < 1e-10
    assert np.max(np.abs(out.data - want_out)) < 1e-10


def test_channel_attention_matches_oracle():
    head = make_head(seed=4)
    x = np.random.default_rng(4).normal(size=(8, 12))
    with no_grad():
        out, attn = head.channel_attention(Tensor(x))
    want_out, want_attn = channel_attention_oracle(x)
    assert np.max(np.abs(attn.data - want_attn)) < 1e-10
    assert np.max(np.abs(out.data - want_out)) < 1e-10


def test_softmax_matches_row_oracle():
    scores = np.random.default_rng(5).normal(size=(7, 7)) * 3
    with no_grad():
        got = ad.softmax(Tensor(scores), axis=1)
    assert np.max(np.abs(got.data - softmax_rows_oracle(scores))) < 1e-12


def test_attention_is_input_dependent():
    head = make_head(seed=6)
    f1 = Tensor(np.random.default_rng(1).normal(size=(5, 12)))
    f2 = Tensor(np.random.default_rng(2).normal(size=(5, 12)))
    with no_grad():
        _, _, a1, _ = head(f1)
        _, _, a2, _ = head(f2)
    assert not np.allclose(a1.data, a2.data)
