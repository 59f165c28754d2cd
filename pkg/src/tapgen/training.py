"""Seeded training loop with epoch-based LR schedule and divergence guard."""

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import DivergenceError
from .losses import boundary_loss, confidence_loss, total_loss
from .network import ProposalNet
from .optim import AdamState, adam_step, zero_grads
from .rng import derive_seed
from .sampling import SamplerConfig, partition_cells, sample_regression_cells, two_stage_sample
from .synth import Window, assign_boundary_labels, assign_confidence_labels


@dataclass
class TrainConfig:
    beta: float = 10.0
    gamma: float = 1e-4
    batch_size: int = 4
    lr_schedule: tuple = ((1e-3, 7), (1e-4, 3))
    max_steps: int = None
    n_cells: int = 32
    lam: float = 0.15
    seed: int = 0
    threads: int = 1


@dataclass
class StepRecord:
    step: int
    epoch: int
    lr: float
    total: float
    boundary: float
    confidence: float
    l2: float
    bl_forward: float
    bl_backward: float
    aux: float
    consistency: float
    reg: float
    cls: float
    skipped_cls: int
    wall_time: float  # kept in memory only; the CSV stays byte-reproducible


@dataclass
class TrainLog:
    records: list = field(default_factory=list)

    CSV_FIELDS = (
        "step",
        "epoch",
        "lr",
        "total",
        "boundary",
        "confidence",
        "l2",
        "bl_forward",
        "bl_backward",
        "aux",
        "consistency",
        "reg",
        "cls",
        "skipped_cls",
    )

    def append(self, rec: StepRecord):
        self.records.append(rec)

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(self.CSV_FIELDS)
            for r in self.records:
                writer.writerow(
                    [
                        r.step,
                        r.epoch,
                        f"{r.lr:.6g}",
                        f"{r.total:.12g}",
                        f"{r.boundary:.12g}",
                        f"{r.confidence:.12g}",
                        f"{r.l2:.12g}",
                        f"{r.bl_forward:.12g}",
                        f"{r.bl_backward:.12g}",
                        f"{r.aux:.12g}",
                        f"{r.consistency:.12g}",
                        f"{r.reg:.12g}",
                        f"{r.cls:.12g}",
                        r.skipped_cls,
                    ]
                )


@dataclass
class TrainResult:
    log: TrainLog
    state: AdamState
    step: int
    batches_done: int
    epoch: int


def lr_for_epoch(schedule, epoch: int) -> float:
    """Piecewise-constant rate; the last entry extends past the schedule."""
    acc = 0
    for lr, n_epochs in schedule:
        acc += n_epochs
        if epoch < acc:
            return lr
    return schedule[-1][0]


def total_epochs(schedule) -> int:
    return sum(n for _, n in schedule)


@dataclass
class WindowLabels:
    g_start: np.ndarray
    g_end: np.ndarray
    g_conf: np.ndarray
    has_both_polarities: bool
    usable: bool


def precompute_labels(windows: list[Window], max_duration: int) -> list[WindowLabels]:
    out = []
    for w in windows:
        length = w.features.shape[0]
        g_start, g_end = assign_boundary_labels(w.annotations, length)
        g_conf = assign_confidence_labels(w.annotations, max_duration, length)
        pos, neg, _ = partition_cells(g_conf)
        boundary_ok = 0 < g_start.sum() < length and 0 < g_end.sum() < length
        out.append(
            WindowLabels(
                g_start,
                g_end,
                g_conf,
                has_both_polarities=bool(pos) and bool(neg),
                usable=boundary_ok and (g_conf > 0).any(),
            )
        )
    return out


def _window_losses(model, cfg, step, ds_index, window, labels):
    out = model.forward_window(window.features)
    l_b, terms_b = boundary_loss(out, labels.g_start, labels.g_end)
    sampler = SamplerConfig(
        n_cells=cfg.n_cells,
        lam=cfg.lam,
        seed=derive_seed(cfg.seed, "sample", step, ds_index),
    )
    if labels.has_both_polarities:
        cls_cells = two_stage_sample(labels.g_conf, sampler)
    else:
        cls_cells = None
    reg_cells = sample_regression_cells(labels.g_conf, sampler)
    l_c, terms_c = confidence_loss(out, cls_cells, reg_cells)
    return l_b, terms_b, l_c, terms_c, cls_cells is None


def train_step(
    model: ProposalNet,
    batch,  # list of (dataset_index, Window, WindowLabels)
    cfg: TrainConfig,
    state: AdamState,
    lr: float,
    step: int,
    executor=None,
):
    """One optimizer update from one batch; returns the loss breakdown.

    Cell-sampling seeds are keyed by (run seed, step, dataset index), so the
    update is invariant to the ordering of windows inside the batch up to
    float summation order.  Windows may run on separate threads (each builds
    its own graph); the reduction order is fixed by the batch order.
    """
    usable = [(k, w, l) for k, w, l in batch if l.usable]
    if not usable:
        return None  # nothing usable in this batch
    if executor is not None and len(usable) > 1:
        results = list(
            executor.map(lambda a: _window_losses(model, cfg, step, *a), usable)
        )
    else:
        results = [_window_losses(model, cfg, step, k, w, l) for k, w, l in usable]
    boundary_terms = []
    confidence_terms = []
    agg = {
        "bl_forward": 0.0,
        "bl_backward": 0.0,
        "aux": 0.0,
        "consistency": 0.0,
        "reg": 0.0,
        "cls": 0.0,
    }
    skipped_cls = 0
    for l_b, terms_b, l_c, terms_c, skipped in results:
        boundary_terms.append(l_b)
        confidence_terms.append(l_c)
        skipped_cls += int(skipped)
        for k, v in {**terms_b, **terms_c}.items():
            agg[k] += v
    inv = 1.0 / len(boundary_terms)
    l_boundary = ad.mul(_sum_terms(boundary_terms), inv)
    l_confidence = ad.mul(_sum_terms(confidence_terms), inv)
    loss, l2 = total_loss(l_boundary, l_confidence, model.parameters(), cfg.beta, cfg.gamma)
    if not math.isfinite(loss.item()):
        raise DivergenceError(f"non-finite loss at step {step}: {loss.item()!r}")
    zero_grads(model.parameters())
    loss.backward()
    adam_step(model.parameters(), state, lr)
    for k in agg:
        agg[k] *= inv
    return {
        "total": loss.item(),
        "boundary": l_boundary.item(),
        "confidence": l_confidence.item(),
        "l2": l2.item(),
        "skipped_cls": skipped_cls,
        **agg,
    }


def _sum_terms(terms):
    acc = terms[0]
    for t in terms[1:]:
        acc = ad.add(acc, t)
    return acc


def train(
    model: ProposalNet,
    windows: list[Window],
    cfg: TrainConfig,
    *,
    state: AdamState = None,
    start_step: int = 0,
    start_batches: int = None,
) -> TrainResult:
    """Run the schedule (or until cfg.max_steps optimizer updates).

    Returns a TrainResult; resuming is exact: pass the checkpointed Adam
    state and counters and the continued run matches an unbroken one.  On a
    non-finite loss the model rolls back to the last finite step and the
    DivergenceError propagates with the partial result attached.
    """
    if cfg.batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    labels = precompute_labels(windows, model.max_duration)
    if not any(l.usable for l in labels):
        raise ValueError("no usable training windows (labels degenerate everywhere)")
    state = state if state is not None else AdamState()
    log = TrainLog()
    executor = None
    if cfg.threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        executor = ThreadPoolExecutor(max_workers=cfg.threads)
    n = len(windows)
    bpe = max(1, (n + cfg.batch_size - 1) // cfg.batch_size)
    step = start_step
    batches_done = start_batches if start_batches is not None else start_step
    last_good = model.snapshot()
    schedule_epochs = total_epochs(cfg.lr_schedule)
    cached = (-1, None)
    while True:
        epoch = batches_done // bpe
        if (
            step >= cfg.max_steps
            if cfg.max_steps is not None
            else epoch >= schedule_epochs
        ):
            if executor is not None:
                executor.shutdown()
            break
        if cached[0] != epoch:
            order = np.random.default_rng(
                derive_seed(cfg.seed, "shuffle", epoch)
            ).permutation(n)
            cached = (epoch, order)
        order = cached[1]
        b = batches_done % bpe
        idx = order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
        batch = [(int(k), windows[k], labels[k]) for k in idx]
        lr = lr_for_epoch(cfg.lr_schedule, epoch)
        t0 = time.perf_counter()
        try:
            stats = train_step(model, batch, cfg, state, lr, step, executor)
        except DivergenceError as exc:
            model.load_param_dict(last_good)
            exc.result = TrainResult(log, state, step, batches_done, epoch)
            if executor is not None:
                executor.shutdown(wait=False)
            raise
        batches_done += 1
        if stats is None:
            continue
        step += 1
        last_good = model.snapshot()
        log.append(
            StepRecord(
                step=step,
                epoch=epoch,
                lr=lr,
                total=stats["total"],
                boundary=stats["boundary"],
                confidence=stats["confidence"],
                l2=stats["l2"],
                bl_forward=stats["bl_forward"],
                bl_backward=stats["bl_backward"],
                aux=stats["aux"],
                consistency=stats["consistency"],
                reg=stats["reg"],
                cls=stats["cls"],
                skipped_cls=stats["skipped_cls"],
                wall_time=time.perf_counter() - t0,
            )
        )
    return TrainResult(log, state, step, batches_done, batches_done // bpe)
