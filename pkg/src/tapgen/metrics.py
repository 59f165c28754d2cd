"""Proposal and detection quality metrics.

Recall follows the greedy one-to-one convention: candidate pairs are taken
in decreasing IoU order, each ground truth and each proposal match at most
once, and a pair counts when its IoU clears the threshold.  AR@AN averages
recall over thresholds then videos; AUC integrates AR over AN in [0, 100]
by the trapezoid rule (AR(0) = 0) and is reported in percent.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

ANET_THRESHOLDS = tuple(np.round(np.arange(0.5, 0.951, 0.05), 2).tolist())
THUMOS_THRESHOLDS = tuple(np.round(np.arange(0.5, 1.001, 0.05), 2).tolist())


@dataclass
class EvalConfig:
    tiou_thresholds: tuple = ANET_THRESHOLDS
    an_max: int = 100
    average_thresholds_first: bool = True


@dataclass
class RecallCurve:
    an_values: np.ndarray  # 1..an_max
    ar_values: np.ndarray  # mean recall at each AN

    def at(self, an: int) -> float:
        return float(self.ar_values[an - 1])


def iou_1d(a, b) -> float:
    """Temporal IoU of two (start, end) intervals; rejects degenerate input."""
    s1, e1 = float(a[0]), float(a[1])
    s2, e2 = float(b[0]), float(b[1])
    if not (s1 < e1 and s2 < e2):
        raise ValueError(f"degenerate interval: [{s1}, {e1}] vs [{s2}, {e2}]")
    inter = min(e1, e2) - max(s1, s2)
    if inter <= 0:
        return 0.0
    return inter / (max(e1, e2) - min(s1, s2))


def _interval(p):
    if hasattr(p, "t_start"):
        return float(p.t_start), float(p.t_end)
    return float(p[0]), float(p[1])


def _pair_ious(proposals, gts) -> np.ndarray:
    out = np.zeros((len(proposals), len(gts)))
    for pi, p in enumerate(proposals):
        span = _interval(p)
        for gi, g in enumerate(gts):
            out[pi, gi] = iou_1d(span, g)
    return out


def _greedy_match_count(ious: np.ndarray, threshold: float) -> int:
    """One-to-one matches among pairs with IoU >= threshold, best IoU first."""
    n_p, n_g = ious.shape
    pairs = [
        (ious[pi, gi], pi, gi)
        for pi in range(n_p)
        for gi in range(n_g)
        if ious[pi, gi] >= threshold
    ]
    pairs.sort(key=lambda x: (-x[0], x[1], x[2]))
    used_p = set()
    used_g = set()
    count = 0
    for _, pi, gi in pairs:
        if pi in used_p or gi in used_g:
            continue
        used_p.add(pi)
        used_g.add(gi)
        count += 1
    return count


def recall_curve(per_video, cfg: EvalConfig = EvalConfig()) -> RecallCurve:
    """AR at every AN in 1..an_max.

    Args:
        per_video: list of (proposals, ground_truths) pairs; proposals are
            score-sorted objects with t_start/t_end, ground truths are
            (start, end) tuples.  Videos without ground truth are excluded
            with a warning.
        cfg: thresholds, AN ceiling and averaging order.

    Returns:
        RecallCurve over AN = 1..an_max, averaged per ``cfg``.
    """
    thresholds = list(cfg.tiou_thresholds)
    kept = []
    for k, (proposals, gts) in enumerate(per_video):
        if len(gts) == 0:
            warnings.warn(f"video {k} has no ground truth; excluded from recall")
            continue
        kept.append((proposals, gts))
    if not kept:
        raise ValueError("no videos with ground truth to evaluate")
    an_values = np.arange(1, cfg.an_max + 1)
    # recall[v, t, a]
    recall = np.zeros((len(kept), len(thresholds), cfg.an_max))
    for v, (proposals, gts) in enumerate(kept):
        ious = _pair_ious(proposals, gts)
        n_g = len(gts)
        for a, an in enumerate(an_values):
            sub = ious[:an]
            for t, thr in enumerate(thresholds):
                recall[v, t, a] = _greedy_match_count(sub, thr) / n_g
    if cfg.average_thresholds_first:
        ar = recall.mean(axis=1).mean(axis=0)
    else:
        ar = recall.mean(axis=0).mean(axis=0)
    return RecallCurve(an_values, ar)


def auc(curve: RecallCurve) -> float:
    """Percent area under AR(AN) over [0, an_max], AR(0) = 0, trapezoid rule."""
    an = np.concatenate([[0.0], curve.an_values.astype(np.float64)])
    ar = np.concatenate([[0.0], curve.ar_values])
    span = an[-1]
    area = float(((ar[1:] + ar[:-1]) * 0.5 * np.diff(an)).sum())
    return 100.0 * area / span


@dataclass
class Detection:
    t_start: float
    t_end: float
    score: float
    label: int


def _ap_all_points(scores, tp_flags, n_gt) -> float:
    """All-point interpolated average precision for one class."""
    if n_gt == 0:
        raise ValueError("AP undefined without ground truth")
    if len(scores) == 0:
        return 0.0
    order = sorted(range(len(scores)), key=lambda k: (-scores[k], k))
    tp = np.asarray(tp_flags, dtype=np.float64)[order]
    fp = 1.0 - tp
    cum_tp = np.cumsum(tp)
    cum_fp = np.cumsum(fp)
    prec = cum_tp / np.maximum(cum_tp + cum_fp, 1e-12)
    rec = cum_tp / n_gt
    mrec = np.concatenate([[0.0], rec, [1.0]])
    mpre = np.concatenate([[0.0], prec, [0.0]])
    for k in range(len(mpre) - 2, -1, -1):
        mpre[k] = max(mpre[k], mpre[k + 1])
    idx = np.where(mrec[1:] != mrec[:-1])[0]
    return float(((mrec[idx + 1] - mrec[idx]) * mpre[idx + 1]).sum())


def detection_map(detections_per_video, gts_per_video, thresholds):
    """Mean average precision over classes, per IoU threshold.

    Args:
        detections_per_video: dict video_id -> list[Detection].
        gts_per_video: dict video_id -> list of (start, end, label).
        thresholds: IoU thresholds to evaluate.

    Returns:
        dict with 'per_threshold' {thr: mAP}, 'average' and 'per_class'.
        Classes with detections but no ground truth are excluded with a
        warning; classes with ground truth and no detections score 0.
    """
    gt_classes = sorted(
        {int(label) for gts in gts_per_video.values() for _, _, label in gts}
    )
    if not gt_classes:
        raise ValueError("no ground-truth instances to evaluate against")
    det_classes = {
        int(d.label) for dets in detections_per_video.values() for d in dets
    }
    for label in sorted(det_classes - set(gt_classes)):
        warnings.warn(f"class {label} has detections but no ground truth; excluded")

    per_class = {label: {} for label in gt_classes}
    for thr in thresholds:
        for label in gt_classes:
            scores, flags = [], []
            n_gt = sum(
                1
                for gts in gts_per_video.values()
                for _, _, lab in gts
                if int(lab) == label
            )
            rows = []
            for vid, dets in detections_per_video.items():
                for d in dets:
                    if int(d.label) == label:
                        rows.append((d.score, vid, d))
            rows.sort(key=lambda r: (-r[0], r[1], r[2].t_start, r[2].t_end))
            matched = {vid: set() for vid in gts_per_video}
            for score, vid, det in rows:
                gts = [
                    (k, (s, e))
                    for k, (s, e, lab) in enumerate(gts_per_video.get(vid, []))
                    if int(lab) == label
                ]
                best_iou, best_k = 0.0, None
                for k, span in gts:
                    if k in matched.get(vid, set()):
                        continue
                    ov = iou_1d((det.t_start, det.t_end), span)
                    if ov > best_iou:
                        best_iou, best_k = ov, k
                if best_k is not None and best_iou >= thr:
                    matched[vid].add(best_k)
                    flags.append(1.0)
                else:
                    flags.append(0.0)
                scores.append(score)
            per_class[label][thr] = _ap_all_points(scores, flags, n_gt)
    per_threshold = {
        thr: float(np.mean([per_class[label][thr] for label in gt_classes]))
        for thr in thresholds
    }
    return {
        "per_threshold": per_threshold,
        "average": float(np.mean(list(per_threshold.values()))),
        "per_class": per_class,
    }


def oracle_detections(proposals, gts) -> list[Detection]:
    """Attach oracle class labels: each proposal takes the label of its
    best-overlapping ground truth (first instance's label when disjoint)."""
    out = []
    if not gts:
        return out
    for p in proposals:
        best_iou, best_label = 0.0, int(gts[0][2])
        for s, e, label in gts:
            ov = iou_1d((p.t_start, p.t_end), (s, e))
            if ov > best_iou:
                best_iou, best_label = ov, int(label)
        out.append(Detection(p.t_start, p.t_end, p.score, best_label))
    return out
