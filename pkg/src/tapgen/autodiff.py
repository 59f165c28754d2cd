"""Float64 tensors with tape-recorded reverse-mode differentiation.

Each operation computes its result eagerly with numpy and records a
backward closure; calling ``backward()`` on a scalar replays the recorded
graph in reverse topological order and accumulates gradients into every
reachable tensor with ``requires_grad``.  The op set covers what the
proposal networks need: 1-D/2-D convolution, pooling, linear upsampling,
matrix products, softmax, and the pointwise functions used by the losses.

Everything is float64 and single-sample (no batch axis); batching is done
by averaging scalar losses, which keeps the core small and deterministic.
"""

import threading
from contextlib import contextmanager

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_state = threading.local()


def _grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad():
    """Skip graph recording inside the block (inference, finite differences)."""
    prev = _grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


class Tensor:
    """Dense float64 array plus an optional gradient of the same shape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def backward(self):
        """Accumulate gradients of this scalar w.r.t. every reachable input."""
        if self.data.size != 1:
            raise ValueError(
                f"backward() requires a scalar, got shape {self.data.shape}"
            )
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._backward(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += g

    # operator sugar; scalars and ndarrays are promoted to constant tensors
    def __add__(self, other):
        return add(self, _as_tensor(other))

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)


class Parameter(Tensor):
    """A named trainable tensor."""

    __slots__ = ("name",)

    def __init__(self, data, name: str):
        super().__init__(data, requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _make(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _make(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)),
    )


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _make(
        a.data * b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        ),
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _make(
        a.data / b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        ),
    )


def sqrt(a: Tensor) -> Tensor:
    y = np.sqrt(a.data)
    return _make(y, (a,), lambda g: (g * 0.5 / y,))


def log(a: Tensor) -> Tensor:
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))
    return _make(y, (a,), lambda g: (g * y * (1.0 - y),))


def pointwise(a: Tensor, fn: str) -> Tensor:
    """Dispatch a named pointwise nonlinearity ("relu" or "sigmoid")."""
    if fn == "relu":
        return relu(a)
    if fn == "sigmoid":
        return sigmoid(a)
    raise ValueError(f"unknown pointwise fn {fn!r}")


def smooth_l1(a: Tensor) -> Tensor:
    """Elementwise Huber-style penalty, quadratic inside |x| < 1."""
    absx = np.abs(a.data)
    y = np.where(absx < 1.0, 0.5 * a.data * a.data, absx - 0.5)
    return _make(y, (a,), lambda g: (g * np.clip(a.data, -1.0, 1.0),))


# ---------------------------------------------------------------------------
# reductions and reshaping


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    y = a.data.sum(axis=axis, keepdims=keepdims)

    def grad(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return _make(y, (a,), grad)


def tmean(a: Tensor) -> Tensor:
    n = a.data.size
    return _make(
        a.data.mean(),
        (a,),
        lambda g: (np.broadcast_to(g / n, a.data.shape).copy(),),
    )


def softmax(a: Tensor, axis: int) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def grad(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - dot),)

    return _make(y, (a,), grad)


def reshape(a: Tensor, shape) -> Tensor:
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.data.shape),))


def transpose(a: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.data.ndim)))
    inv = tuple(np.argsort(axes))
    return _make(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    y = np.concatenate([t.data for t in tensors], axis=axis)
    return _make(y, tuple(tensors), lambda g: tuple(np.split(g, splits, axis=axis)))


def reverse_time(a: Tensor) -> Tensor:
    """Flip along the last (time) axis."""
    return _make(
        np.flip(a.data, axis=-1).copy(),
        (a,),
        lambda g: (np.flip(g, axis=-1).copy(),),
    )


def select(a: Tensor, index: int) -> Tensor:
    """Pick one slice along axis 0 (e.g. a head channel)."""

    def grad(g):
        gx = np.zeros_like(a.data)
        gx[index] = g
        return (gx,)

    return _make(a.data[index].copy(), (a,), grad)


def take(a: Tensor, indices: np.ndarray) -> Tensor:
    """Gather flat positions out of ``a`` (scatter-add on the way back)."""
    idx = np.asarray(indices, dtype=np.int64)

    def grad(g):
        gx = np.zeros(a.data.size, dtype=np.float64)
        np.add.at(gx, idx, g)
        return (gx.reshape(a.data.shape),)

    return _make(a.data.reshape(-1)[idx], (a,), grad)


# ---------------------------------------------------------------------------
# structured ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(
            f"matmul expects (M,K)x(K,N), got {a.data.shape} x {b.data.shape}"
        )
    return _make(
        a.data @ b.data,
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def conv1d(x: Tensor, w: Tensor, b=None, stride: int = 1, pad: int = None) -> Tensor:
    """Cross-correlation over time: x (Cin,T), w (Cout,Cin,K) -> (Cout,T').

    ``pad`` defaults to (K-1)//2 which keeps T'==T at stride 1.
    """
    cin, t = x.data.shape
    cout, cin_w, k = w.data.shape
    if cin != cin_w:
        raise ValueError(
            f"conv1d channel mismatch: input {x.data.shape}, kernel {w.data.shape}"
        )
    if pad is None:
        pad = (k - 1) // 2
    xp = np.pad(x.data, ((0, 0), (pad, pad)))
    t_out = (t + 2 * pad - k) // stride + 1
    if t_out <= 0:
        raise ValueError(f"conv1d kernel {k} too large for length {t} with pad {pad}")
    # (Cin, T', K) -> (Cin*K, T')
    win = sliding_window_view(xp, k, axis=1)[:, ::stride, :]
    cols = win.transpose(0, 2, 1).reshape(cin * k, t_out)
    w2 = w.data.reshape(cout, cin * k)
    y = w2 @ cols
    parents = [x, w]
    if b is not None:
        y = y + b.data[:, None]
        parents.append(b)

    def grad(g):
        gw = (g @ cols.T).reshape(w.data.shape)
        gcols = w2.T @ g
        gxp = np.zeros_like(xp)
        gc = gcols.reshape(cin, k, t_out)
        for kk in range(k):
            gxp[:, kk : kk + stride * t_out : stride] += gc[:, kk, :]
        gx = gxp[:, pad : pad + t] if pad else gxp
        out = [gx, gw]
        if b is not None:
            out.append(g.sum(axis=1))
        return tuple(out)

    return _make(y, tuple(parents), grad)


def conv2d(x: Tensor, w: Tensor, b=None, stride: int = 1, pad: int = None) -> Tensor:
    """Cross-correlation on a 2-D grid: x (Cin,H,W), w (Cout,Cin,K,K)."""
    cin, h, wd = x.data.shape
    cout, cin_w, kh, kw = w.data.shape
    if cin != cin_w:
        raise ValueError(
            f"conv2d channel mismatch: input {x.data.shape}, kernel {w.data.shape}"
        )
    if pad is None:
        pad = (kh - 1) // 2
    xp = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad)))
    h_out = (h + 2 * pad - kh) // stride + 1
    w_out = (wd + 2 * pad - kw) // stride + 1
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    cols = win.transpose(0, 3, 4, 1, 2).reshape(cin * kh * kw, h_out * w_out)
    w2 = w.data.reshape(cout, cin * kh * kw)
    y = (w2 @ cols).reshape(cout, h_out, w_out)
    parents = [x, w]
    if b is not None:
        y = y + b.data[:, None, None]
        parents.append(b)

    def grad(g):
        g2 = g.reshape(cout, h_out * w_out)
        gw = (g2 @ cols.T).reshape(w.data.shape)
        gcols = (w2.T @ g2).reshape(cin, kh, kw, h_out, w_out)
        gxp = np.zeros_like(xp)
        for a in range(kh):
            for c in range(kw):
                gxp[
                    :, a : a + stride * h_out : stride, c : c + stride * w_out : stride
                ] += gcols[:, a, c]
        gx = gxp[:, pad : pad + h, pad : pad + wd] if pad else gxp
        out = [gx, gw]
        if b is not None:
            out.append(g.sum(axis=(1, 2)))
        return tuple(out)

    return _make(y, tuple(parents), grad)


def maxpool1d(x: Tensor) -> Tensor:
    """Window-2 stride-2 max over the last axis; odd lengths pad -inf on the right."""
    t = x.data.shape[-1]
    lead = x.data.shape[:-1]
    xr = x.data.reshape(-1, t)
    if t % 2:
        xr = np.pad(xr, ((0, 0), (0, 1)), constant_values=-np.inf)
    t2 = xr.shape[1] // 2
    pairs = xr.reshape(-1, t2, 2)
    arg = pairs.argmax(axis=2)
    y = np.take_along_axis(pairs, arg[:, :, None], axis=2)[:, :, 0]

    def grad(g):
        gz = np.zeros_like(pairs)
        np.put_along_axis(gz, arg[:, :, None], g.reshape(-1, t2, 1), axis=2)
        gx = gz.reshape(-1, t2 * 2)[:, :t]
        return (gx.reshape(x.data.shape),)

    return _make(y.reshape(lead + (t2,)), (x,), grad)


def _upsample_plan(t: int):
    # output i reads source position (i + 0.5)/2 - 0.5, clamped to the ends
    src = (np.arange(2 * t) + 0.5) / 2.0 - 0.5
    src = np.clip(src, 0.0, t - 1.0)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, t - 1)
    w1 = src - i0
    return i0, i1, 1.0 - w1, w1


def upsample_linear1d(x: Tensor) -> Tensor:
    """Double the last axis by linear interpolation with endpoint replication."""
    t = x.data.shape[-1]
    i0, i1, w0, w1 = _upsample_plan(t)
    y = x.data[..., i0] * w0 + x.data[..., i1] * w1

    def grad(g):
        gx = np.zeros_like(x.data)
        flat_g = g.reshape(-1, 2 * t)
        flat_gx = gx.reshape(-1, t)
        np.add.at(flat_gx, (slice(None), i0), flat_g * w0)
        np.add.at(flat_gx, (slice(None), i1), flat_g * w1)
        return (flat_gx.reshape(x.data.shape),)

    return _make(y, (x,), grad)


def linear_sample(x: Tensor, i0, i1, w0, w1) -> Tensor:
    """Weighted two-point gather over time: x (C,T) -> (C,P).

    Index/weight vectors are precomputed constants; out-of-range points
    carry zero weight, so gradients stay inside the sequence.
    """
    y = x.data[:, i0] * w0 + x.data[:, i1] * w1

    def grad(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, (slice(None), i0), g * w0)
        np.add.at(gx, (slice(None), i1), g * w1)
        return (gx,)

    return _make(y, (x,), grad)
