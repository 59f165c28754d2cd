"""Input validation helpers for the public API."""

import numpy as np


def check_features(features, *, n_channels: int = None, min_length: int = 1) -> np.ndarray:
    """Validate a snippet feature sequence and return it as float64 (T, C).

    Raises ValueError with explicit dimensions on any mismatch.
    """
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"features must be 2-D (T, C), got shape {arr.shape}")
    t, c = arr.shape
    if t < min_length:
        raise ValueError(f"feature sequence too short: T={t} < {min_length}")
    if n_channels is not None and c != n_channels:
        raise ValueError(f"expected {n_channels} feature channels, got {c}")
    if not np.isfinite(arr).all():
        raise ValueError("features contain non-finite values")
    return arr


def check_interval(t_start: float, t_end: float, *, length: float = None) -> tuple[float, float]:
    """Validate one temporal interval (start strictly before end)."""
    s, e = float(t_start), float(t_end)
    if not (s < e):
        raise ValueError(f"degenerate interval [{s}, {e}]")
    if length is not None and (s < 0 or e > length):
        raise ValueError(f"interval [{s}, {e}] outside [0, {length}]")
    return s, e


def check_instances(instances, *, length: float = None):
    """Validate a list of action instances; returns them sorted by start."""
    from .synth import ActionInstance

    out = []
    for inst in instances:
        if isinstance(inst, ActionInstance):
            s, e, label = inst.t_start, inst.t_end, inst.label
        elif isinstance(inst, dict):
            s = inst["start"] if "start" in inst else inst["t_start"]
            e = inst["end"] if "end" in inst else inst["t_end"]
            label = int(inst.get("label", 0))
        else:
            s, e = inst[0], inst[1]
            label = int(inst[2]) if len(inst) > 2 else 0
        s, e = check_interval(s, e, length=length)
        out.append(ActionInstance(s, e, label))
    return sorted(out, key=lambda a: (a.t_start, a.t_end))


def check_seed(seed) -> int:
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise ValueError(f"seed must be an integer, got {seed!r}")
    return int(seed)
