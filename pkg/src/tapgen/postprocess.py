"""Score fusion, candidate extraction and Gaussian-decay suppression."""

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import DataError
from .grid import valid_cell_mask
from .boundary import build_boundary_map
from .metrics import iou_1d
from .network import ProposalNet


@dataclass
class Proposal:
    """A scored temporal interval in snippet coordinates."""

    t_start: float
    t_end: float
    score: float

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError(f"degenerate proposal [{self.t_start}, {self.t_end}]")


@dataclass
class SuppressionConfig:
    sigma: float = 0.5
    score_floor: float = 1e-4
    max_out: int = 100
    hard: bool = False  # classic suppression for comparison runs
    hard_threshold: float = 0.7


def fuse_scores(
    boundary_map: np.ndarray, cls_map: np.ndarray, reg_map: np.ndarray
) -> np.ndarray:
    """Final per-cell score: boundary * sqrt(cls * reg) on valid cells."""
    b = np.asarray(boundary_map, dtype=np.float64)
    c = np.asarray(cls_map, dtype=np.float64)
    r = np.asarray(reg_map, dtype=np.float64)
    if not (b.shape == c.shape == r.shape) or b.ndim != 2:
        raise ValueError(
            f"score maps must share one (D, T) shape, got {b.shape}, {c.shape}, {r.shape}"
        )
    fused = b * np.sqrt(c * r)
    fused *= valid_cell_mask(*b.shape)
    return fused


def extract_candidates(score_map: np.ndarray) -> list[Proposal]:
    """Each positive-score valid cell (j, i) becomes the interval [i, i+j].

    Sorted by score descending; ties break on (t_start, t_end) so the
    ordering is total and deterministic.
    """
    score_map = np.asarray(score_map, dtype=np.float64)
    d, t = score_map.shape
    mask = valid_cell_mask(d, t)
    jj, ii = np.nonzero(mask & (score_map > 0))
    out = [
        Proposal(float(i), float(i + j), float(score_map[j, i]))
        for j, i in zip(jj.tolist(), ii.tolist())
    ]
    out.sort(key=lambda p: (-p.score, p.t_start, p.t_end))
    return out


def soft_nms(proposals: list[Proposal], cfg: SuppressionConfig) -> list[Proposal]:
    """Iterative Gaussian re-scoring.

    Pick the highest currently-scored proposal, decay every remaining score
    by exp(-iou^2 / sigma) against it, drop anything at or below the score
    floor, stop at ``max_out`` survivors.  Disjoint proposals keep their
    scores exactly; sigma -> inf approaches plain truncation.
    """
    if cfg.sigma <= 0:
        raise ValueError(f"sigma must be positive, got {cfg.sigma}")
    remaining = [(p.t_start, p.t_end, p.score) for p in proposals]
    kept: list[Proposal] = []
    while remaining and len(kept) < cfg.max_out:
        best = max(range(len(remaining)), key=lambda k: (remaining[k][2], -k))
        s, e, score = remaining.pop(best)
        kept.append(Proposal(s, e, score))
        survivors = []
        for s2, e2, sc2 in remaining:
            overlap = iou_1d((s, e), (s2, e2))
            if cfg.hard:
                if overlap > cfg.hard_threshold:
                    continue
            elif overlap > 0:
                sc2 = sc2 * math.exp(-(overlap * overlap) / cfg.sigma)
            if sc2 > cfg.score_floor:
                survivors.append((s2, e2, sc2))
        remaining = survivors
    kept.sort(key=lambda p: (-p.score, p.t_start, p.t_end))
    return kept


def _inference_offsets(video_length: int, window_length: int) -> list[int]:
    """75%-overlap offsets covering the whole video, tail included."""
    stride = window_length // 4
    offsets = list(range(0, video_length - window_length + 1, stride))
    last = video_length - window_length
    if offsets[-1] != last:
        offsets.append(last)
    return offsets


def window_score_map(model: ProposalNet, features: np.ndarray) -> np.ndarray:
    """Fused (D, T) score map for one window, gradients disabled."""
    with ad.no_grad():
        out = model.forward_window(features)
        bmap = build_boundary_map(
            out.heatmaps.fused_start.data,
            out.heatmaps.fused_end.data,
            model.max_duration,
        )
        return fuse_scores(bmap, out.cls_map.data, out.reg_map.data)


def infer_video(
    model: ProposalNet,
    features: np.ndarray,
    cfg: SuppressionConfig,
    *,
    video_id: str = "",
    executor=None,
) -> list[Proposal]:
    """Slide windows over a video, pool shifted candidates, suppress."""
    t = features.shape[0]
    if t < model.window_length:
        raise DataError(
            f"video {video_id or '<unnamed>'} shorter than one window: "
            f"{t} < {model.window_length}"
        )
    offsets = _inference_offsets(t, model.window_length)
    slices = [features[o : o + model.window_length] for o in offsets]
    if executor is not None and len(slices) > 1:
        maps = list(executor.map(lambda f: window_score_map(model, f), slices))
    else:
        maps = [window_score_map(model, f) for f in slices]
    pooled = []
    for off, smap in zip(offsets, maps):
        for p in extract_candidates(smap):
            pooled.append(Proposal(p.t_start + off, p.t_end + off, p.score))
    pooled.sort(key=lambda p: (-p.score, p.t_start, p.t_end))
    return soft_nms(pooled, cfg)
