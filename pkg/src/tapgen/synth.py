"""Synthetic untrimmed-video features with planted action instances.

Snippet features are background Gaussian noise; inside each action a
class-specific +/-1 pattern vector is added with a two-snippet linear ramp
at both boundaries, so starts and ends are statistically detectable.
All endpoints are integers in snippet coordinates.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .grid import valid_cell_mask
from .rng import make_rng

NOISE_STD = 0.1
PATTERN_AMPLITUDE = 1.0
RAMP_WIDTH = 2
MIN_DURATION = 4
MIN_GAP = 2
_PATTERN_ROOT = 0x7A9  # class pattern codebook constant, not a run seed


@dataclass
class ActionInstance:
    """One ground-truth action interval in snippet coordinates."""

    t_start: float
    t_end: float
    label: int = 0

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError(f"degenerate instance [{self.t_start}, {self.t_end}]")

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass
class VideoRecord:
    """A full synthetic video: id, (T, C) features, and its instances."""

    id: str
    features: np.ndarray
    annotations: list[ActionInstance] = field(default_factory=list)

    @property
    def length(self) -> int:
        return self.features.shape[0]


@dataclass
class Window:
    """A training window cut from a video, annotations in window coordinates."""

    start_offset: int
    features: np.ndarray
    annotations: list[ActionInstance]
    video_id: str = ""


def class_pattern(label: int, n_channels: int) -> np.ndarray:
    """Deterministic +/-1 pattern for a class, shared across all videos."""
    rng = make_rng(_PATTERN_ROOT, "class-pattern", label, n_channels)
    return PATTERN_AMPLITUDE * rng.choice(np.array([-1.0, 1.0]), size=n_channels)


def _place_instances(rng, length, n_actions, max_duration):
    """Disjoint integer intervals with at least MIN_GAP snippets between them."""
    d_room = (length - MIN_GAP * (n_actions + 1)) // n_actions
    d_max = min(max_duration, d_room)
    if d_max < MIN_DURATION:
        raise DataError(
            f"cannot fit {n_actions} actions of >= {MIN_DURATION} snippets "
            f"into length {length}"
        )
    durations = rng.integers(MIN_DURATION, d_max + 1, size=n_actions)
    slack = length - durations.sum() - MIN_GAP * (n_actions + 1)
    extra = rng.multinomial(slack, np.full(n_actions + 1, 1.0 / (n_actions + 1)))
    starts = []
    pos = 0
    for idx, dur in enumerate(durations):
        pos += MIN_GAP + int(extra[idx])
        starts.append(pos)
        pos += int(dur)
    return [(s, s + int(d)) for s, d in zip(starts, durations)]


def _envelope(t_start: int, t_end: int) -> np.ndarray:
    # ramp over the first/last RAMP_WIDTH snippets of the instance
    t = np.arange(t_start, t_end, dtype=np.float64)
    up = (t - t_start + 0.5) / RAMP_WIDTH
    down = (t_end - t - 0.5) / RAMP_WIDTH
    return np.minimum(1.0, np.minimum(up, down))


def gen_video(
    seed: int,
    length: int,
    n_channels: int,
    n_actions: int,
    *,
    n_classes: int = 4,
    max_duration: int = 10**9,
    video_id: str = None,
) -> VideoRecord:
    """Generate one deterministic synthetic video.

    Args:
        seed: per-video seed; the same seed reproduces the video bit-exactly.
        length: number of snippets T.
        n_channels: feature dimension C.
        n_actions: how many disjoint action instances to plant.
        n_classes: label space size for the planted instances.
        max_duration: cap on planted instance duration, in snippets.
        video_id: stable identifier; derived from the seed when omitted.

    Returns:
        VideoRecord with float64 (T, C) features (exactly representable in
        float32 so the on-disk format round-trips bit-equal).
    """
    if n_actions < 1:
        raise DataError("n_actions must be >= 1")
    rng = make_rng(seed, "video")
    spans = _place_instances(rng, length, n_actions, max_duration)
    labels = rng.integers(0, n_classes, size=n_actions)
    feats = rng.normal(0.0, NOISE_STD, size=(length, n_channels))
    annotations = []
    for (s, e), label in zip(spans, labels.tolist()):
        feats[s:e] += _envelope(s, e)[:, None] * class_pattern(label, n_channels)
        annotations.append(ActionInstance(float(s), float(e), label))
    feats = feats.astype(np.float32).astype(np.float64)  # storage precision
    vid = video_id if video_id is not None else f"synth-{seed:08x}"
    return VideoRecord(vid, feats, annotations)


def gen_dataset(
    seed: int,
    n_videos: int,
    length: int,
    n_channels: int,
    n_actions: int,
    *,
    n_classes: int = 4,
    max_duration: int = 10**9,
) -> list[VideoRecord]:
    """Generate ``n_videos`` records from per-video sub-seeds of ``seed``."""
    from .rng import derive_seed

    return [
        gen_video(
            derive_seed(seed, "data", k),
            length,
            n_channels,
            n_actions,
            n_classes=n_classes,
            max_duration=max_duration,
            video_id=f"video-{k:04d}",
        )
        for k in range(n_videos)
    ]


def clip_instances(annotations, lo: float, hi: float) -> list[ActionInstance]:
    """Clip instances to [lo, hi) window coords; keep fragments >= 1 snippet."""
    out = []
    for a in annotations:
        s = max(a.t_start, lo)
        e = min(a.t_end, hi)
        if e - s >= 1.0:
            out.append(ActionInstance(s - lo, e - lo, a.label))
    return out


def make_windows(video: VideoRecord, window_length: int) -> list[Window]:
    """Slice a video into 75%-overlapping training windows.

    Windows slide by window_length/4; a window is kept only if at least one
    clipped instance with >= 1 visible snippet falls inside it.
    """
    if window_length % 4 != 0:
        raise DataError(f"window_length must be divisible by 4, got {window_length}")
    t = video.length
    if window_length > t:
        raise DataError(
            f"window_length {window_length} exceeds video length {t} ({video.id})"
        )
    stride = window_length // 4
    windows = []
    for off in range(0, t - window_length + 1, stride):
        clipped = clip_instances(video.annotations, off, off + window_length)
        if clipped:
            windows.append(
                Window(
                    off,
                    video.features[off : off + window_length].copy(),
                    clipped,
                    video.id,
                )
            )
    return windows


def assign_boundary_labels(annotations, length: int):
    """Binary start/end label vectors over snippet positions.

    Each instance of duration d marks positions within d/10 of its start
    (resp. end), clipped to the window.
    """
    g_start = np.zeros(length)
    g_end = np.zeros(length)
    for a in annotations:
        r = a.duration / 10.0
        for g, center in ((g_start, a.t_start), (g_end, a.t_end)):
            lo = int(np.ceil(center - r))
            hi = int(np.floor(center + r))
            lo = max(lo, 0)
            hi = min(hi, length - 1)
            if lo <= hi:
                g[lo : hi + 1] = 1.0
    return g_start, g_end


def assign_confidence_labels(annotations, max_duration: int, length: int) -> np.ndarray:
    """(D, T) map of best IoU between cell (j, i) = [i, i+j] and any instance."""
    jj = np.arange(max_duration, dtype=np.float64)[:, None]
    ii = np.arange(length, dtype=np.float64)[None, :]
    starts = np.broadcast_to(ii, (max_duration, length))
    ends = ii + jj
    g = np.zeros((max_duration, length))
    mask = valid_cell_mask(max_duration, length)
    for a in annotations:
        inter = np.minimum(ends, a.t_end) - np.maximum(starts, a.t_start)
        inter = np.clip(inter, 0.0, None)
        union = np.maximum(ends, a.t_end) - np.minimum(starts, a.t_start)
        with np.errstate(divide="ignore", invalid="ignore"):
            iou = np.where(union > 0, inter / union, 0.0)
        np.maximum(g, iou, out=g)
    g[~mask] = 0.0
    return g
