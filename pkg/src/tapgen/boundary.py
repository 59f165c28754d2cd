"""Boundary probability estimation.

A two-level nested-skip encoder-decoder over the shared temporal features
emits per-snippet start/end probabilities.  The same network is run on the
forward and the time-reversed sequence (shared weights); after flipping the
reversed pass back, reversed-input start probabilities act as end evidence
and vice versa.  The two views are fused by an elementwise geometric mean.

Fusion is direction-symmetric by construction: the fused start probabilities
of a flipped window equal the flipped fused end probabilities of the
original, bit for bit, because both are the same commutative product of one
forward-pass and one reversed-pass head.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .grid import valid_cell_mask
from .layers import ConvBlock, PointConv1d


@dataclass
class BoundaryHeatmaps:
    """Per-snippet boundary probabilities from both passes plus their fusion."""

    fwd_start: Tensor
    fwd_end: Tensor
    bwd_start: Tensor  # already flipped into forward time
    bwd_end: Tensor
    fused_start: Tensor
    fused_end: Tensor


class BoundaryUNet:
    """Nested-skip encoder-decoder with heads at two decoder depths.

    Node (d, k) lives at temporal scale 1/2^d; the final head reads the
    densest top-level node, the auxiliary head reads the first decoder node
    and is used only as a training-time supervision target.
    """

    def __init__(self, c_in: int, width: int, rng, name: str = "boundary"):
        w = width
        self.block00 = ConvBlock(c_in, w, rng, f"{name}.block00")
        self.block10 = ConvBlock(w, w, rng, f"{name}.block10")
        self.block20 = ConvBlock(w, w, rng, f"{name}.block20")
        self.block01 = ConvBlock(2 * w, w, rng, f"{name}.block01")
        self.block11 = ConvBlock(2 * w, w, rng, f"{name}.block11")
        self.block02 = ConvBlock(3 * w, w, rng, f"{name}.block02")
        self.head_aux = PointConv1d(w, 2, rng, f"{name}.head_aux", init_scale=0.01)
        self.head = PointConv1d(w, 2, rng, f"{name}.head", init_scale=0.01)

    def parameters(self):
        out = []
        for m in (
            self.block00,
            self.block10,
            self.block20,
            self.block01,
            self.block11,
            self.block02,
            self.head_aux,
            self.head,
        ):
            out.extend(m.parameters())
        return out

    def __call__(self, x: Tensor):
        """x: (C, T) -> (start, end, aux_start, aux_end, intermediate (W, T))."""
        x00 = self.block00(x)
        x10 = self.block10(ad.maxpool1d(x00))
        x20 = self.block20(ad.maxpool1d(x10))
        x01 = self.block01(ad.concat([x00, ad.upsample_linear1d(x10)], axis=0))
        x11 = self.block11(ad.concat([x10, ad.upsample_linear1d(x20)], axis=0))
        x02 = self.block02(
            ad.concat([x00, x01, ad.upsample_linear1d(x11)], axis=0)
        )
        aux = ad.sigmoid(self.head_aux(x01))
        out = ad.sigmoid(self.head(x02))
        return (
            ad.select(out, 0),
            ad.select(out, 1),
            ad.select(aux, 0),
            ad.select(aux, 1),
            x02,
        )


@dataclass
class DirectionalPass:
    """One pass of the shared net, expressed in forward time."""

    start: Tensor
    end: Tensor
    aux_start: Tensor
    aux_end: Tensor
    intermediate: Tensor


def run_forward_pass(unet: BoundaryUNet, base_feat: Tensor) -> DirectionalPass:
    s, e, aux_s, aux_e, inter = unet(base_feat)
    return DirectionalPass(s, e, aux_s, aux_e, inter)


def run_backward_pass(unet: BoundaryUNet, base_feat_rev: Tensor) -> DirectionalPass:
    """Run on a time-reversed sequence and flip everything back.

    On reversed input the start head marks reversed-time starts, i.e.
    forward-time ends; hence the start/end roles swap after the flip.
    """
    s, e, aux_s, aux_e, inter = unet(base_feat_rev)
    return DirectionalPass(
        start=ad.reverse_time(e),
        end=ad.reverse_time(s),
        aux_start=ad.reverse_time(aux_e),
        aux_end=ad.reverse_time(aux_s),
        intermediate=ad.reverse_time(inter),
    )


def fuse_heatmaps(fwd: DirectionalPass, bwd: DirectionalPass) -> BoundaryHeatmaps:
    """Elementwise geometric mean of the two directional estimates."""
    return BoundaryHeatmaps(
        fwd_start=fwd.start,
        fwd_end=fwd.end,
        bwd_start=bwd.start,
        bwd_end=bwd.end,
        fused_start=ad.sqrt(ad.mul(fwd.start, bwd.start)),
        fused_end=ad.sqrt(ad.mul(fwd.end, bwd.end)),
    )


def build_boundary_map(
    fused_start: np.ndarray, fused_end: np.ndarray, max_duration: int
) -> np.ndarray:
    """(D, T) map: cell (j, i) = start[i] * end[i + j], zero off-grid."""
    start = np.asarray(fused_start, dtype=np.float64)
    end = np.asarray(fused_end, dtype=np.float64)
    if start.shape != end.shape or start.ndim != 1:
        raise ValueError(
            f"boundary vectors must share a 1-D shape, got {start.shape} and {end.shape}"
        )
    t = start.shape[0]
    out = np.zeros((max_duration, t))
    for j in range(1, max_duration):
        if j < t:
            out[j, : t - j] = start[: t - j] * end[j:]
    out *= valid_cell_mask(max_duration, t)
    return out
