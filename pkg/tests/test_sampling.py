"""Two-stage balanced cell sampling and the ratio rebalancing curve."""

import numpy as np
import pytest

from tapgen.grid import valid_cell_mask
from tapgen.sampling import (
    SamplerConfig,
    partition_cells,
    rebalance_ratio,
    sample_regression_cells,
    scale_rebalance,
    two_stage_sample,
)

from _oracles import rebalance_oracle


def test_rebalance_frozen_values():
    lam = 0.15
    # r = 0 maps to lam / e
    assert rebalance_ratio(0.0, lam) == pytest.approx(lam / np.e, abs=1e-12)
    assert rebalance_ratio(0.0, lam) == pytest.approx(0.0551819161757164, abs=1e-12)
    # closed form at r = 0.05
    assert rebalance_ratio(0.05, lam) == pytest.approx(
        0.15 * np.exp(0.05 / 0.15 - 1.0), abs=1e-14
    )
    assert rebalance_ratio(0.05, lam) == pytest.approx(0.0770125678548888, abs=1e-12)
    # identity above the knee
    assert rebalance_ratio(0.15, lam) == 0.15
    assert rebalance_ratio(0.8, lam) == 0.8


@pytest.mark.parametrize("lam", [0.1, 0.15, 0.3])
def test_rebalance_properties(lam):
    rs = np.linspace(0.0, 1.0, 201)
    vals = np.array([rebalance_ratio(float(r), lam) for r in rs])
    # matches the closed-form oracle
    want = np.array([rebalance_oracle(float(r), lam) for r in rs])
    assert np.allclose(vals, want, atol=1e-14)
    # strictly increasing, continuous at the knee, never below the input
    assert np.all(np.diff(vals) > 0)
    assert vals[0] == pytest.approx(lam / np.e, abs=1e-14)
    assert np.all(vals[rs <= lam] >= rs[rs <= lam] - 1e-12)
    knee = rebalance_ratio(lam - 1e-9, lam)
    assert knee == pytest.approx(lam, abs=1e-8)


def test_rebalance_domain_errors():
    with pytest.raises(ValueError):
        rebalance_ratio(-0.1, 0.15)
    with pytest.raises(ValueError):
        rebalance_ratio(1.1, 0.15)
    with pytest.raises(ValueError):
        rebalance_ratio(0.5, 0.0)
    with pytest.raises(ValueError):
        rebalance_ratio(0.5, 1.0)


def test_scale_rebalance_frozen_case():
    probs = scale_rebalance([0.05, 0.15, 0.80], 0.15)
    pre = np.array([0.0770125678657928, 0.15, 0.80])
    assert np.allclose(probs, pre / pre.sum(), atol=1e-12)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_scale_rebalance_lifts_rare_regions():
    probs = scale_rebalance([0.02, 0.38, 0.60], 0.15)
    assert probs[0] > 0.02  # the rare region gains mass
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_scale_rebalance_excludes_empty_regions():
    probs = scale_rebalance([0.0, 0.4, 0.6], 0.15, counts=[0, 4, 6])
    assert probs[0] == 0.0
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        scale_rebalance([1.0, 0.0, 0.0], 0.15, counts=[0, 0, 0])


def test_scale_rebalance_requires_normalized_input():
    with pytest.raises(ValueError):
        scale_rebalance([0.5, 0.2, 0.2], 0.15)


def test_partition_cells_thresholds():
    g = np.zeros((4, 8))
    g[1, 2] = 0.9   # positive
    g[2, 3] = 0.71  # positive
    g[1, 4] = 0.7   # ignored (not strictly above)
    g[2, 5] = 0.3   # ignored
    g[1, 1] = 0.1   # negative (valid cell, low iou)
    pos, neg, ignored = partition_cells(g)
    pos_ji = {(j, i) for j, i, _ in pos}
    neg_ji = {(j, i) for j, i, _ in neg}
    ign_ji = {(j, i) for j, i, _ in ignored}
    assert {(1, 2), (2, 3)} <= pos_ji
    assert {(1, 4), (2, 5)} <= ign_ji
    assert (1, 1) in neg_ji
    # the invalid corner never appears anywhere
    assert all(valid_cell_mask(4, 8)[j, i] for j, i in pos_ji | neg_ji | ign_ji)
    # targets ride along with the coordinates
    assert dict(((j, i), t) for j, i, t in pos)[(1, 2)] == 0.9


def make_gconf(seed=0, d=8, t=32):
    rng = np.random.default_rng(seed)
    g = rng.uniform(0, 1, size=(d, t)) * valid_cell_mask(d, t)
    return g


@pytest.mark.parametrize("seed", range(5))
def test_two_stage_sample_counts_and_balance(seed):
    g = make_gconf(seed)
    cfg = SamplerConfig(n_cells=32, seed=seed)
    cells = two_stage_sample(g, cfg, window_length=32)
    assert len(cells) == 32
    n_pos = sum(c.is_positive for c in cells)
    assert n_pos == 16  # ceil(32/2)
    for c in cells:
        assert valid_cell_mask(8, 32)[c.j, c.i]
        if c.is_positive:
            assert g[c.j, c.i] > 0.7
        else:
            assert g[c.j, c.i] < 0.3
        assert c.target == g[c.j, c.i]


def test_two_stage_sample_odd_count():
    g = make_gconf(3)
    cells = two_stage_sample(g, SamplerConfig(n_cells=7, seed=1), window_length=32)
    assert len(cells) == 7
    assert sum(c.is_positive for c in cells) == 4  # ceil(7/2)


def test_two_stage_sample_deterministic():
    g = make_gconf(4)
    a = two_stage_sample(g, SamplerConfig(n_cells=16, seed=9), window_length=32)
    b = two_stage_sample(g, SamplerConfig(n_cells=16, seed=9), window_length=32)
    assert [(c.j, c.i) for c in a] == [(c.j, c.i) for c in b]
    c = two_stage_sample(g, SamplerConfig(n_cells=16, seed=10), window_length=32)
    assert [(x.j, x.i) for x in a] != [(x.j, x.i) for x in c]


def test_two_stage_sample_requires_both_polarities():
    d, t = 4, 16
    g = np.full((d, t), 0.9) * valid_cell_mask(d, t)  # invalid cells are 0 but excluded
    g[~valid_cell_mask(d, t)] = 0.0
    g[valid_cell_mask(d, t)] = 0.9  # positives only, no valid negative
    with pytest.raises(ValueError):
        two_stage_sample(g, SamplerConfig(n_cells=8, seed=0), window_length=t)
    g[valid_cell_mask(d, t)] = 0.1  # negatives only
    with pytest.raises(ValueError):
        two_stage_sample(g, SamplerConfig(n_cells=8, seed=0), window_length=t)


def test_monte_carlo_region_frequencies():
    """Scale-region draw frequencies track the rebalanced probabilities."""
    d, t = 16, 32
    rng = np.random.default_rng(11)
    g = rng.uniform(0.0, 0.29, size=(d, t)) * valid_cell_mask(d, t)
    # plant positives with a known skew over j / l_w regions:
    # short ([0, 0.3] -> j <= 9), medium ((0.3, 0.7] -> j 10..22), long (none)
    short_cells = [(j, i) for j in range(1, 10) for i in range(0, t - j, 3)]
    med_cells = [(5 + 5, i) for i in range(0, t - 10, 11)]  # j = 10, 3 cells
    for j, i in short_cells:
        g[j, i] = 0.9
    for j, i in med_cells:
        g[j, i] = 0.9
    counts = np.zeros(3)
    n_draws = 10_000
    total = 0
    for k in range(n_draws // 4):  # 4 positive draws per call
        cells = two_stage_sample(g, SamplerConfig(n_cells=8, seed=k), window_length=t)
        for c in cells:
            if c.is_positive:
                r = c.j / t
                region = 0 if r <= 0.3 else (1 if r <= 0.7 else 2)
                counts[region] += 1
                total += 1
    n_short, n_med = len(short_cells), len(med_cells)
    raw = np.array([n_short, n_med, 0], dtype=np.float64)
    ratios = raw / raw.sum()
    expect = scale_rebalance(ratios, 0.15, counts=raw)
    freq = counts / total
    assert np.all(np.abs(freq - expect) < 0.02), (freq, expect)


def test_sample_regression_cells_mix():
    d, t = 8, 32
    g = make_gconf(6, d, t)
    g[g < 0.5] = 0.0  # carve out genuine zero-target cells
    cells = sample_regression_cells(g, SamplerConfig(n_cells=16, seed=2))
    assert len(cells) == 16
    assert sum(1 for c in cells if c.target > 0) == 8  # ceil(n/2) positive targets
    assert sum(1 for c in cells if c.target == 0) == 8
    for c in cells:
        assert valid_cell_mask(d, t)[c.j, c.i]
        assert c.target == g[c.j, c.i]


def test_sample_regression_cells_all_nonzero():
    d, t = 8, 32
    g = make_gconf(7, d, t)  # every valid cell has target > 0
    cells = sample_regression_cells(g, SamplerConfig(n_cells=16, seed=3))
    assert len(cells) == 16
    assert all(c.target > 0 for c in cells)
