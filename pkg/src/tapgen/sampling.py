"""Two-stage balanced cell sampling for the confidence losses.

Stage 1 fixes the positive:negative quota at ceil(n/2):floor(n/2) using the
0.7/0.3 IoU thresholds.  Stage 2 balances each polarity across duration
scale regions: the empirical region ratios are pushed toward uniform by an
exponential rebalance of any ratio at or below ``lam``, re-normalized over
non-empty regions, and cells are drawn region-first (with replacement once
a region is exhausted).
"""

from dataclasses import dataclass, field

import numpy as np

from .grid import valid_cell_mask

POSITIVE_IOU = 0.7
NEGATIVE_IOU = 0.3
DEFAULT_REGIONS = ((0.0, 0.3), (0.3, 0.7), (0.7, 1.0))


@dataclass
class SamplerConfig:
    n_cells: int = 32
    lam: float = 0.15
    scale_regions: tuple = DEFAULT_REGIONS
    seed: int = 0


@dataclass
class CellSample:
    """One sampled grid cell with its IoU target."""

    j: int
    i: int
    target: float
    is_positive: bool = field(default=False)


def partition_cells(g_conf: np.ndarray):
    """Split valid cells into (positives, negatives, ignored) by IoU target."""
    d, t = g_conf.shape
    mask = valid_cell_mask(d, t)
    jj, ii = np.nonzero(mask)
    targets = g_conf[jj, ii]
    pos, neg, ignored = [], [], []
    for j, i, target in zip(jj.tolist(), ii.tolist(), targets.tolist()):
        if target > POSITIVE_IOU:
            pos.append((j, i, target))
        elif target < NEGATIVE_IOU:
            neg.append((j, i, target))
        else:
            ignored.append((j, i, target))
    return pos, neg, ignored


def rebalance_ratio(r: float, lam: float) -> float:
    """Raw rebalance branch: lam*exp(r/lam - 1) for r <= lam, else r.

    Continuous at r == lam; never below the input on (0, lam]; identity
    above lam.  r == 0 takes the same branch and maps to lam/e.
    """
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"ratio must lie in [0, 1], got {r}")
    if lam <= 0 or lam >= 1:
        raise ValueError(f"lam must lie in (0, 1), got {lam}")
    if r <= lam:
        return lam * float(np.exp(r / lam - 1.0))
    return r


def scale_rebalance(ratios, lam: float, counts=None) -> np.ndarray:
    """Rebalanced sampling probabilities over scale regions.

    ``ratios`` must sum to 1 (tolerance 1e-9).  Each ratio passes through
    ``rebalance_ratio``; regions known to be empty (``counts`` == 0) are
    excluded; the result is re-normalized to sum to 1.
    """
    ratios = np.asarray(ratios, dtype=np.float64)
    if abs(ratios.sum() - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios.sum():.12f}")
    out = np.array([rebalance_ratio(float(r), lam) for r in ratios])
    if counts is not None:
        out = np.where(np.asarray(counts) > 0, out, 0.0)
    total = out.sum()
    if total <= 0:
        raise ValueError("no non-empty scale regions to sample from")
    return out / total


def _region_index(duration: int, window_length: int, regions) -> int:
    x = duration / window_length
    for k, (lo, hi) in enumerate(regions):
        if (x >= lo if k == 0 else x > lo) and x <= hi:
            return k
    raise ValueError(f"normalized duration {x} outside scale regions {regions}")


def _draw_balanced(pool, n_draw, cfg: SamplerConfig, rng, window_length, is_positive):
    """Region-first draws: pick a region by rebalanced probability, then a
    cell from that region's shuffled queue, with replacement once empty."""
    regions = [[] for _ in cfg.scale_regions]
    for cell in pool:
        regions[_region_index(cell[0], window_length, cfg.scale_regions)].append(cell)
    counts = np.array([len(r) for r in regions])
    probs = scale_rebalance(counts / counts.sum(), cfg.lam, counts=counts)
    queues = []
    for region in regions:
        order = rng.permutation(len(region))
        queues.append([region[k] for k in order])
    drawn = []
    for _ in range(n_draw):
        k = int(rng.choice(len(regions), p=probs))
        if queues[k]:
            j, i, target = queues[k].pop()
        else:
            j, i, target = regions[k][int(rng.integers(len(regions[k])))]
        drawn.append(CellSample(j, i, target, is_positive))
    return drawn


def two_stage_sample(g_conf: np.ndarray, cfg: SamplerConfig, window_length: int = None):
    """Balanced classification cells for one window.

    Returns exactly ``cfg.n_cells`` CellSamples, ceil(n/2) positive and
    floor(n/2) negative.  Raises ValueError when either polarity is empty
    (callers skip the window's classification loss and report it).
    """
    if window_length is None:
        window_length = g_conf.shape[1]
    pos, neg, _ = partition_cells(g_conf)
    if not pos or not neg:
        raise ValueError(
            f"need both polarities to sample: {len(pos)} positive, {len(neg)} negative"
        )
    rng = np.random.default_rng(cfg.seed)
    n_pos = (cfg.n_cells + 1) // 2
    n_neg = cfg.n_cells // 2
    out = _draw_balanced(pos, n_pos, cfg, rng, window_length, True)
    out += _draw_balanced(neg, n_neg, cfg, rng, window_length, False)
    return out


def sample_regression_cells(g_conf: np.ndarray, cfg: SamplerConfig):
    """Cells for the IoU regression: ceil(n/2) with target > 0 plus an equal
    share of zero-target cells, drawn uniformly (replacement when short)."""
    d, t = g_conf.shape
    mask = valid_cell_mask(d, t)
    jj, ii = np.nonzero(mask)
    targets = g_conf[jj, ii]
    nonzero = [(j, i, g) for j, i, g in zip(jj.tolist(), ii.tolist(), targets.tolist()) if g > 0]
    zero = [(j, i, 0.0) for j, i, g in zip(jj.tolist(), ii.tolist(), targets.tolist()) if g == 0]
    if not nonzero:
        raise ValueError("no cells with positive IoU target to regress on")
    rng = np.random.default_rng(np.random.default_rng(cfg.seed).integers(2**63))
    n_half = (cfg.n_cells + 1) // 2
    n_zero = cfg.n_cells - n_half
    if not zero:  # window fully covered by actions: regress nonzero only
        n_half, n_zero = cfg.n_cells, 0

    def draw(pool, n):
        if n == 0:
            return []
        idx = rng.permutation(len(pool))[:n]
        picked = [pool[k] for k in idx.tolist()]
        while len(picked) < n:
            picked.append(pool[int(rng.integers(len(pool)))])
        return picked

    cells = draw(nonzero, n_half) + draw(zero, n_zero)
    return [CellSample(j, i, g, g > POSITIVE_IOU) for j, i, g in cells]
