"""Independent reference implementations used to cross-check the package.

Everything here is written the slow, obvious way (explicit loops, no shared
code with src/) so the fast implementations have something honest to match.
"""

import numpy as np


# ---------------------------------------------------------------- numerics


def naive_conv1d(x, w, b=None, stride=1, pad=None):
    """x (C_in, T), w (C_out, C_in, K) -> (C_out, T_out), triple loop."""
    c_out, c_in, k = w.shape
    if pad is None:
        pad = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (pad, pad)))
    t_out = (xp.shape[1] - k) // stride + 1
    out = np.zeros((c_out, t_out))
    for o in range(c_out):
        for t in range(t_out):
            acc = 0.0
            for i in range(c_in):
                for kk in range(k):
                    acc += w[o, i, kk] * xp[i, t * stride + kk]
            out[o, t] = acc + (0.0 if b is None else b[o])
    return out


def naive_conv2d(x, w, b=None, stride=1, pad=None):
    """x (C_in, H, W), w (C_out, C_in, K, K) -> (C_out, H_out, W_out)."""
    c_out, c_in, k, _ = w.shape
    if pad is None:
        pad = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    h_out = (xp.shape[1] - k) // stride + 1
    w_out = (xp.shape[2] - k) // stride + 1
    out = np.zeros((c_out, h_out, w_out))
    for o in range(c_out):
        for r in range(h_out):
            for c in range(w_out):
                acc = 0.0
                for i in range(c_in):
                    for kr in range(k):
                        for kc in range(k):
                            acc += w[o, i, kr, kc] * xp[i, r * stride + kr, c * stride + kc]
                out[o, r, c] = acc + (0.0 if b is None else b[o])
    return out


def fd_grad(f, x, eps=1e-6):
    """Central finite differences of scalar f at array x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + eps
        hi = f(x)
        flat[k] = orig - eps
        lo = f(x)
        flat[k] = orig
        gflat[k] = (hi - lo) / (2 * eps)
    return g


def fd_grad_sampled(f, x, indices, eps=1e-6):
    """Central differences at selected flat indices only; returns dict."""
    x = np.asarray(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = {}
    for k in indices:
        orig = flat[k]
        flat[k] = orig + eps
        hi = f(x)
        flat[k] = orig - eps
        lo = f(x)
        flat[k] = orig
        out[int(k)] = (hi - lo) / (2 * eps)
    return out


def reference_adam(grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Parameter deltas for a sequence of gradients of one scalar weight."""
    m = v = 0.0
    w = 0.0
    trace = []
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        w = w - lr * mhat / (np.sqrt(vhat) + eps)
        trace.append(w)
    return trace


# ------------------------------------------------------------- map algebra


def brute_boundary_map(start, end, max_duration):
    """values[j][i] = start[i] * end[i+j] on valid cells, double loop."""
    t = len(start)
    out = np.zeros((max_duration, t))
    for j in range(max_duration):
        for i in range(t):
            if j >= 1 and i + j < t:
                out[j, i] = start[i] * end[i + j]
    return out


def brute_iou(a0, a1, b0, b1):
    inter = min(a1, b1) - max(a0, b0)
    if inter <= 0:
        return 0.0
    return inter / (max(a1, b1) - min(a0, b0))


def brute_conf_labels(instances, max_duration, length):
    """Max IoU of each grid cell's interval [i, i+j] against the instances."""
    out = np.zeros((max_duration, length))
    for j in range(max_duration):
        for i in range(length):
            if not (j >= 1 and i + j < length):
                continue
            best = 0.0
            for s, e in instances:
                best = max(best, brute_iou(float(i), float(i + j), s, e))
            out[j, i] = best
    return out


def brute_fused(fwd, bwd):
    return np.sqrt(np.asarray(fwd) * np.asarray(bwd))


# ----------------------------------------------------------------- fusion


def brute_score_fusion(boundary, cls, reg):
    d, t = boundary.shape
    out = np.zeros((d, t))
    for j in range(d):
        for i in range(t):
            if j >= 1 and i + j < t:
                out[j, i] = boundary[j, i] * np.sqrt(cls[j, i] * reg[j, i])
    return out


# ---------------------------------------------------------------- softmax


def softmax_rows_oracle(scores):
    """Row softmax with explicit loops (max-shifted)."""
    scores = np.asarray(scores, dtype=np.float64)
    out = np.zeros_like(scores)
    for r in range(scores.shape[0]):
        row = scores[r]
        m = row.max()
        e = np.array([np.exp(v - m) for v in row])
        out[r] = e / e.sum()
    return out


def position_attention_oracle(x, wa, ba, wb, bb, wv, bv):
    """Loop translation of the position attention branch.

    x (H, L): project to a = wa@x + ba, b = wb@x + bb, v = wv@x + bv;
    scores = a.T @ b (L, L); row softmax; out = x + (attn @ v.T).T.
    """
    a = wa @ x + ba
    b = wb @ x + bb
    v = wv @ x + bv
    scores = a.T @ b
    attn = softmax_rows_oracle(scores)
    attended = (attn @ v.T).T
    return x + attended, attn


def channel_attention_oracle(x):
    attn = softmax_rows_oracle(x @ x.T)
    return x + attn @ x, attn


# ------------------------------------------------------------- rebalancing


def rebalance_oracle(r, lam):
    if r <= lam:
        return lam * np.exp(r / lam - 1.0)
    return r


# ----------------------------------------------------------------- softnms


def soft_nms_reference(spans, scores, sigma, floor):
    """Direct translation of the published soft suppression pseudo-code.

    Greedy: move the argmax to the keep list, Gaussian-decay every remaining
    score by its overlap with it, drop survivors that sink to/below floor.
    """
    spans = [tuple(map(float, s)) for s in spans]
    scores = [float(s) for s in scores]
    keep_spans, keep_scores = [], []
    while spans:
        m = int(np.argmax(scores))
        keep_spans.append(spans[m])
        keep_scores.append(scores[m])
        ms = spans[m]
        del spans[m], scores[m]
        nxt_spans, nxt_scores = [], []
        for sp, sc in zip(spans, scores):
            ov = brute_iou(ms[0], ms[1], sp[0], sp[1])
            if ov > 0:
                sc = sc * np.exp(-(ov * ov) / sigma)
            if sc > floor:
                nxt_spans.append(sp)
                nxt_scores.append(sc)
        spans, scores = nxt_spans, nxt_scores
    return keep_spans, keep_scores


# ----------------------------------------------------------------- metrics


def recall_at(proposals, gts, threshold, top_n):
    """Fraction of gts matched one-to-one by the top_n proposals."""
    cand = proposals[:top_n]
    pairs = []
    for pi, p in enumerate(cand):
        for gi, g in enumerate(gts):
            ov = brute_iou(p[0], p[1], g[0], g[1])
            if ov >= threshold:
                pairs.append((ov, pi, gi))
    pairs.sort(key=lambda q: (-q[0], q[1], q[2]))
    used_p, used_g = set(), set()
    hit = 0
    for _, pi, gi in pairs:
        if pi in used_p or gi in used_g:
            continue
        used_p.add(pi)
        used_g.add(gi)
        hit += 1
    return hit / len(gts)
