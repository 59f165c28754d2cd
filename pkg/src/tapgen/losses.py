"""Training objectives.

The boundary loss scores each directional head with a class-frequency
weighted binary logistic term and ties the two directions together with a
mean-squared consistency penalty on the pre-head features.  The confidence
loss mixes smooth-L1 IoU regression with a weighted logistic term on hard
labels.  The total objective is boundary + beta * confidence + gamma * L2.
"""

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .grid import flat_index
from .network import WindowOutputs

# additive floor inside each log: small enough that any probability a
# float64 sigmoid can actually distinguish from 0 is unchanged bit-for-bit,
# but a fully saturated wrong-side prediction yields a large finite penalty
# instead of an infinite loss that would abort training
LOG_FLOOR = 1e-300


def weighted_bl_loss(p: Tensor, g: np.ndarray) -> Tensor:
    """Weighted binary logistic loss.

    Positive and negative terms are reweighted by the inverse class
    frequency so sparse boundary labels still carry signal.  Requires at
    least one positive and one negative label; saturated probabilities are
    floored at LOG_FLOOR inside the logs so the loss stays finite.
    """
    g = np.asarray(g, dtype=np.float64)
    if p.data.shape != g.shape:
        raise ValueError(f"prediction shape {p.data.shape} != label shape {g.shape}")
    pos = np.flatnonzero(g.reshape(-1) >= 0.5)
    neg = np.flatnonzero(g.reshape(-1) < 0.5)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError(
            f"labels must contain both classes, got {len(pos)}/{g.size} positive"
        )
    # each log is evaluated only on the cells its weight selects, so a
    # saturated prediction on the opposite side cannot inject 0 * inf
    term_pos = ad.tsum(ad.log(ad.add(ad.take(p, pos), LOG_FLOOR)))
    term_neg = ad.tsum(
        ad.log(ad.add(ad.sub(Tensor(np.ones(len(neg))), ad.take(p, neg)), LOG_FLOOR))
    )
    return ad.add(ad.mul(term_pos, -1.0 / len(pos)), ad.mul(term_neg, -1.0 / len(neg)))


def consistency_loss(feat_a: Tensor, feat_b: Tensor) -> Tensor:
    """Mean squared difference between the two directional features."""
    diff = ad.sub(feat_a, feat_b)
    return ad.tmean(ad.mul(diff, diff))


def boundary_loss(outputs: WindowOutputs, g_start: np.ndarray, g_end: np.ndarray):
    """Boundary objective for one window; returns (loss, term breakdown)."""
    hm = outputs.heatmaps
    terms = {}
    fwd = ad.add(
        weighted_bl_loss(hm.fwd_start, g_start), weighted_bl_loss(hm.fwd_end, g_end)
    )
    aux = ad.add(
        weighted_bl_loss(outputs.fwd.aux_start, g_start),
        weighted_bl_loss(outputs.fwd.aux_end, g_end),
    )
    total = ad.add(fwd, aux)
    terms["bl_forward"] = fwd.item()
    if outputs.bwd is not None:
        bwd = ad.add(
            weighted_bl_loss(hm.bwd_start, g_start), weighted_bl_loss(hm.bwd_end, g_end)
        )
        aux_bwd = ad.add(
            weighted_bl_loss(outputs.bwd.aux_start, g_start),
            weighted_bl_loss(outputs.bwd.aux_end, g_end),
        )
        cons = consistency_loss(outputs.fwd.intermediate, outputs.bwd.intermediate)
        total = ad.add(ad.add(total, ad.add(bwd, aux_bwd)), cons)
        terms["bl_backward"] = bwd.item()
        terms["aux"] = aux.item() + aux_bwd.item()
        terms["consistency"] = cons.item()
    else:
        terms["bl_backward"] = 0.0
        terms["aux"] = aux.item()
        terms["consistency"] = 0.0
    return total, terms


def confidence_loss(outputs: WindowOutputs, cls_cells, reg_cells):
    """Confidence objective: smooth-L1 regression + weighted logistic.

    ``cls_cells`` may be None (window had a single polarity); the
    classification term is then skipped.
    """
    if not reg_cells:
        raise ValueError("confidence_loss needs at least one regression cell")
    t = outputs.reg_map.data.shape[1]
    terms = {}
    idx = np.array([flat_index(c.j, c.i, t) for c in reg_cells], dtype=np.int64)
    targets = np.array([c.target for c in reg_cells])
    pred = ad.take(outputs.reg_map, idx)
    reg = ad.tmean(ad.smooth_l1(ad.sub(pred, Tensor(targets))))
    terms["reg"] = reg.item()
    total = reg
    if cls_cells:
        idx_c = np.array([flat_index(c.j, c.i, t) for c in cls_cells], dtype=np.int64)
        hard = np.array([1.0 if c.is_positive else 0.0 for c in cls_cells])
        cls = weighted_bl_loss(ad.take(outputs.cls_map, idx_c), hard)
        total = ad.add(reg, cls)
        terms["cls"] = cls.item()
    else:
        terms["cls"] = 0.0
    return total, terms


def l2_penalty(params) -> Tensor:
    """Sum of squared entries over every parameter tensor."""
    total = None
    for p in params:
        term = ad.tsum(ad.mul(p, p))
        total = term if total is None else ad.add(total, term)
    return total


def total_loss(l_boundary: Tensor, l_confidence, params, beta: float, gamma: float):
    """Combine the batch-averaged objectives with the L2 term."""
    l2 = l2_penalty(params)
    out = ad.add(l_boundary, ad.mul(l2, gamma))
    if l_confidence is not None:
        out = ad.add(out, ad.mul(l_confidence, beta))
    return out, l2
