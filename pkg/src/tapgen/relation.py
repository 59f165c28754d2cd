"""Proposal confidence maps from proposal-to-proposal relations.

Shared temporal features are reduced, resampled into a fixed-size feature
block per candidate interval, contracted to one vector per grid cell, then
enriched by two self-attention branches (over grid positions and over
channels) before a small 2-D conv stack emits two sigmoid confidence
channels: one trained on hard labels, one regressed onto IoU targets.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .grid import valid_cell_mask
from .layers import he_conv1d, he_conv2d, he_dense

N_SAMPLE_POINTS = 32
EXTENSION_RATIO = 0.25


@dataclass
class SamplePlan:
    """Precomputed interpolation tables for one (D, T) grid."""

    i0: np.ndarray  # (D*T*N,) left snippet index
    i1: np.ndarray  # right snippet index
    w0: np.ndarray  # weights; zero where the point leaves the window
    w1: np.ndarray


def build_sample_plan(
    max_duration: int, length: int, n_points: int = N_SAMPLE_POINTS
) -> SamplePlan:
    """Uniform sample positions over each candidate's extended interval.

    Cell (j, i) covers [i, i+j] extended by EXTENSION_RATIO*j on both sides;
    n_points positions are spread uniformly across the extension, sampled
    by linear interpolation between neighbouring snippets.  Positions that
    fall outside [0, T-1] contribute zero, as do invalid cells.
    """
    d, t, n = max_duration, length, n_points
    offsets = np.arange(n) / (n - 1)
    mask = valid_cell_mask(d, t)
    i0 = np.zeros((d, t, n), dtype=np.int64)
    i1 = np.zeros((d, t, n), dtype=np.int64)
    w0 = np.zeros((d, t, n))
    w1 = np.zeros((d, t, n))
    for j in range(d):
        ext = EXTENSION_RATIO * j
        lo = np.arange(t) - ext
        hi = np.arange(t) + j + ext
        pos = lo[:, None] + (hi - lo)[:, None] * offsets[None, :]  # (T, N)
        left = np.floor(pos)
        frac = pos - left
        li = left.astype(np.int64)
        ri = li + 1
        lw = 1.0 - frac
        rw = frac
        lw[(li < 0) | (li > t - 1)] = 0.0
        rw[(ri < 0) | (ri > t - 1)] = 0.0
        i0[j] = np.clip(li, 0, t - 1)
        i1[j] = np.clip(ri, 0, t - 1)
        w0[j] = lw * mask[j][:, None]
        w1[j] = rw * mask[j][:, None]
    flat = d * t * n
    return SamplePlan(i0.reshape(flat), i1.reshape(flat), w0.reshape(flat), w1.reshape(flat))


class RelationHead:
    """Confidence-map head over the (duration, position) candidate grid."""

    def __init__(
        self,
        c_in: int,
        max_duration: int,
        length: int,
        rng,
        *,
        reduced_channels: int = 32,
        hidden_width: int = 64,
        attn_width: int = None,
        n_points: int = N_SAMPLE_POINTS,
        name: str = "relation",
    ):
        self.max_duration = max_duration
        self.length = length
        self.reduced_channels = reduced_channels
        self.hidden_width = hidden_width
        self.n_points = n_points
        if attn_width is None:
            attn_width = max(hidden_width // 4, 1)
        self.attn_width = attn_width
        self.plan = build_sample_plan(max_duration, length, n_points)
        self.mask = valid_cell_mask(max_duration, length).astype(np.float64)

        h = hidden_width
        self.reduce_w = Parameter(he_conv1d(rng, reduced_channels, c_in, 3), f"{name}.reduce.w")
        self.reduce_b = Parameter(np.zeros(reduced_channels), f"{name}.reduce.b")
        self.dense_w = Parameter(he_dense(rng, reduced_channels * n_points, h), f"{name}.dense.w")
        self.dense_b = Parameter(np.zeros(h), f"{name}.dense.b")
        # position attention projections (1x1 convs as matrices)
        self.wa = Parameter(he_dense(rng, h, attn_width).T, f"{name}.attn.wa")
        self.ba = Parameter(np.zeros((attn_width, 1)), f"{name}.attn.ba")
        self.wb = Parameter(he_dense(rng, h, attn_width).T, f"{name}.attn.wb")
        self.bb = Parameter(np.zeros((attn_width, 1)), f"{name}.attn.bb")
        self.wv = Parameter(he_dense(rng, h, h).T, f"{name}.attn.wv")
        self.bv = Parameter(np.zeros((h, 1)), f"{name}.attn.bv")
        # plain branch (1x1) and the 2-D conv head
        self.w0 = Parameter(he_dense(rng, h, h).T, f"{name}.base.w")
        self.b0 = Parameter(np.zeros((h, 1)), f"{name}.base.b")
        self.head1_w = Parameter(he_conv2d(rng, h, h, 3), f"{name}.head1.w")
        self.head1_b = Parameter(np.zeros(h), f"{name}.head1.b")
        # near-zero final init: initial confidence logits far from zero get
        # yanked back so hard that the sigmoid can saturate irrecoverably
        self.head2_w = Parameter(0.01 * he_conv2d(rng, 2, h, 3), f"{name}.head2.w")
        self.head2_b = Parameter(np.zeros(2), f"{name}.head2.b")

    def parameters(self) -> list[Parameter]:
        return [
            self.reduce_w,
            self.reduce_b,
            self.dense_w,
            self.dense_b,
            self.wa,
            self.ba,
            self.wb,
            self.bb,
            self.wv,
            self.bv,
            self.w0,
            self.b0,
            self.head1_w,
            self.head1_b,
            self.head2_w,
            self.head2_b,
        ]

    def reduce(self, base_feat: Tensor) -> Tensor:
        """(C, T) shared features -> (C_r, T)."""
        return ad.relu(ad.conv1d(base_feat, self.reduce_w, self.reduce_b))

    def proposal_features(self, reduced: Tensor) -> Tensor:
        """(C_r, T) -> (D*T, C_r*N) sampled feature block per grid cell."""
        d, t, n = self.max_duration, self.length, self.n_points
        c = self.reduced_channels
        samp = ad.linear_sample(reduced, self.plan.i0, self.plan.i1, self.plan.w0, self.plan.w1)
        cells = ad.reshape(samp, (c, d * t, n))
        return ad.reshape(ad.transpose(cells, (1, 0, 2)), (d * t, c * n))

    def contract(self, cells: Tensor) -> Tensor:
        """Per-cell dense contraction of the sample block: -> (H, L)."""
        hidden = ad.relu(ad.add(ad.matmul(cells, self.dense_w), self.dense_b))
        return ad.transpose(hidden, (1, 0))

    def position_attention(self, x: Tensor):
        """x: (H, L).  Rows of the L x L attention matrix sum to 1."""
        a = ad.add(ad.matmul(self.wa, x), self.ba)  # (A, L)
        b = ad.add(ad.matmul(self.wb, x), self.bb)
        v = ad.add(ad.matmul(self.wv, x), self.bv)  # (H, L)
        scores = ad.matmul(ad.transpose(a, (1, 0)), b)  # (L, L)
        attn = ad.softmax(scores, axis=1)
        attended = ad.transpose(ad.matmul(attn, ad.transpose(v, (1, 0))), (1, 0))
        return ad.add(x, attended), attn

    def channel_attention(self, x: Tensor):
        """x: (H, L).  Channel-by-channel similarity, rows sum to 1."""
        scores = ad.matmul(x, ad.transpose(x, (1, 0)))  # (H, H)
        attn = ad.softmax(scores, axis=1)
        attended = ad.matmul(attn, x)
        return ad.add(x, attended), attn

    def __call__(self, base_feat: Tensor):
        """(C, T) shared features -> (cls_map, reg_map, pos_attn, chan_attn)."""
        d, t = self.max_duration, self.length
        h = self.hidden_width
        reduced = self.reduce(base_feat)
        cells = self.proposal_features(reduced)
        x = self.contract(cells)  # (H, L)
        pos_out, pos_attn = self.position_attention(x)
        chan_out, chan_attn = self.channel_attention(x)
        plain = ad.add(ad.matmul(self.w0, x), self.b0)
        agg = ad.add(ad.add(plain, pos_out), chan_out)
        grid = ad.reshape(agg, (h, d, t))
        hid = ad.relu(ad.conv2d(grid, self.head1_w, self.head1_b))
        out = ad.sigmoid(ad.conv2d(hid, self.head2_w, self.head2_b))
        mask = Tensor(self.mask)
        cls_map = ad.mul(ad.select(out, 0), mask)
        reg_map = ad.mul(ad.select(out, 1), mask)
        return cls_map, reg_map, pos_attn, chan_attn
