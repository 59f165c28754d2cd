"""Full per-window model: shared temporal base, boundary net, relation head."""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .boundary import (
    BoundaryHeatmaps,
    BoundaryUNet,
    DirectionalPass,
    fuse_heatmaps,
    run_backward_pass,
    run_forward_pass,
)
from .layers import ConvBlock
from .relation import N_SAMPLE_POINTS, RelationHead
from .rng import make_rng
from .validation import check_features


class TemporalBase:
    """Two kernel-3 conv blocks shared by the boundary and relation parts."""

    def __init__(self, c_in: int, width: int, rng, name: str = "base"):
        self.block1 = ConvBlock(c_in, width, rng, f"{name}.block1")
        self.block2 = ConvBlock(width, width, rng, f"{name}.block2")

    def __call__(self, x: Tensor) -> Tensor:
        return self.block2(self.block1(x))

    def parameters(self):
        return self.block1.parameters() + self.block2.parameters()


@dataclass
class WindowOutputs:
    """Everything the losses and the inference fusion need for one window."""

    heatmaps: BoundaryHeatmaps
    fwd: DirectionalPass
    bwd: DirectionalPass | None
    cls_map: Tensor  # (D, T), zero on invalid cells
    reg_map: Tensor
    pos_attention: Tensor
    chan_attention: Tensor


class ProposalNet:
    """Static per-window network over (window_length, C) feature slices."""

    def __init__(
        self,
        in_channels: int,
        window_length: int,
        max_duration: int,
        *,
        base_width: int = 64,
        unet_width: int = 64,
        reduced_channels: int = 32,
        hidden_width: int = 64,
        attn_width: int = None,
        n_points: int = N_SAMPLE_POINTS,
        bidirectional: bool = True,
        seed: int = 0,
    ):
        if window_length % 4 != 0:
            raise ValueError(f"window_length must be divisible by 4, got {window_length}")
        if not 1 <= max_duration <= window_length:
            raise ValueError(
                f"max_duration must lie in [1, window_length], got {max_duration}"
            )
        self.in_channels = in_channels
        self.window_length = window_length
        self.max_duration = max_duration
        self.bidirectional = bidirectional
        self.seed = seed
        rng = make_rng(seed, "init")
        self.base = TemporalBase(in_channels, base_width, rng)
        self.boundary = BoundaryUNet(base_width, unet_width, rng)
        self.relation = RelationHead(
            base_width,
            max_duration,
            window_length,
            rng,
            reduced_channels=reduced_channels,
            hidden_width=hidden_width,
            attn_width=attn_width,
            n_points=n_points,
        )
        self._config = {
            "in_channels": in_channels,
            "window_length": window_length,
            "max_duration": max_duration,
            "base_width": base_width,
            "unet_width": unet_width,
            "reduced_channels": reduced_channels,
            "hidden_width": hidden_width,
            "attn_width": self.relation.attn_width,
            "n_points": n_points,
            "bidirectional": bidirectional,
        }
        names = [p.name for p in self.parameters()]
        if len(names) != len(set(names)):
            raise ValueError("duplicate parameter names in model")

    @property
    def config(self) -> dict:
        return dict(self._config)

    def parameters(self) -> list[Parameter]:
        return (
            self.base.parameters()
            + self.boundary.parameters()
            + self.relation.parameters()
        )

    def param_dict(self) -> dict[str, np.ndarray]:
        return {p.name: p.data for p in self.parameters()}

    def load_param_dict(self, values: dict[str, np.ndarray]) -> None:
        params = {p.name: p for p in self.parameters()}
        missing = sorted(set(params) - set(values))
        extra = sorted(set(values) - set(params))
        if missing or extra:
            raise ValueError(f"parameter manifest mismatch: missing={missing} extra={extra}")
        for name, p in params.items():
            arr = np.asarray(values[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ValueError(
                    f"parameter {name}: shape {arr.shape} != expected {p.data.shape}"
                )
            p.data = arr.copy()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {p.name: p.data.copy() for p in self.parameters()}

    def forward_window(self, features: np.ndarray) -> WindowOutputs:
        """features: (window_length, C) numpy array -> all per-window outputs."""
        feats = check_features(
            features, n_channels=self.in_channels, min_length=self.window_length
        )
        if feats.shape[0] != self.window_length:
            raise ValueError(
                f"expected window of length {self.window_length}, got {feats.shape[0]}"
            )
        x = Tensor(feats.T)  # (C, T)
        base_fwd = self.base(x)
        fwd = run_forward_pass(self.boundary, base_fwd)
        if self.bidirectional:
            base_bwd = self.base(ad.reverse_time(x))
            bwd = run_backward_pass(self.boundary, base_bwd)
            heatmaps = fuse_heatmaps(fwd, bwd)
        else:
            bwd = None
            heatmaps = BoundaryHeatmaps(
                fwd_start=fwd.start,
                fwd_end=fwd.end,
                bwd_start=fwd.start,
                bwd_end=fwd.end,
                fused_start=fwd.start,
                fused_end=fwd.end,
            )
        cls_map, reg_map, pos_attn, chan_attn = self.relation(base_fwd)
        return WindowOutputs(
            heatmaps=heatmaps,
            fwd=fwd,
            bwd=bwd,
            cls_map=cls_map,
            reg_map=reg_map,
            pos_attention=pos_attn,
            chan_attention=chan_attn,
        )
