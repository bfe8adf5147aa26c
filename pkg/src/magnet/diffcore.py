"""Minimal reverse-mode differentiation over dense float64 tensors.

The engine supports exactly the operations the classifier graph needs.
Operations executed while a :class:`Graph` is active are recorded on a tape
(insertion order is a valid topological order); :func:`backward` replays the
tape in reverse and accumulates gradients additively into every leaf that
requires them. All values are double precision and every op validates its
inputs, so a forward or backward pass that returns has produced only finite
numbers.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Graph",
    "ShapeMismatchError",
    "NonFiniteError",
    "GraphConsumedError",
    "tensor",
    "param",
    "forward_op",
    "backward",
    "finite_difference_grad",
    "matmul",
    "add",
    "mul",
    "concat",
    "sigmoid",
    "tanh",
    "relu",
    "softmax_rows",
    "reduce_mean",
    "reduce_sum",
    "dropout_apply",
    "slice_range",
    "row",
    "gather_rows",
    "transpose",
    "bce_with_logits",
    "lstm_seq",
]


class ShapeMismatchError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


class GraphConsumedError(RuntimeError):
    pass


class Tensor:
    """Dense row-major float64 array plus an optional gradient accumulator."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def accumulate(self, delta: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += delta

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def tensor(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def param(data) -> Tensor:
    return Tensor(data, requires_grad=True)


class _Node:
    """One recorded operation: kind, inputs, produced tensor, vjp closure."""

    __slots__ = ("kind", "inputs", "output", "vjp")

    def __init__(self, kind, inputs, output, vjp):
        self.kind = kind
        self.inputs = inputs
        self.output = output
        self.vjp = vjp


_ACTIVE_GRAPH: "Graph | None" = None


class Graph:
    """Tape of operation records; context manager activates recording."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self.consumed = False

    def __enter__(self) -> "Graph":
        global _ACTIVE_GRAPH
        if _ACTIVE_GRAPH is not None:
            raise RuntimeError("a Graph is already active; nesting is not supported")
        _ACTIVE_GRAPH = self
        return self

    def __exit__(self, *exc) -> None:
        global _ACTIVE_GRAPH
        _ACTIVE_GRAPH = None

    def __len__(self) -> int:
        return len(self.nodes)


def _record(kind, inputs, output, vjp) -> None:
    if _ACTIVE_GRAPH is not None and output.requires_grad:
        _ACTIVE_GRAPH.nodes.append(_Node(kind, inputs, output, vjp))


def _check_finite(kind: str, *arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteError(f"{kind}: non-finite values in operand")


def _shape_err(kind: str, *shapes) -> ShapeMismatchError:
    pretty = " and ".join(str(tuple(s)) for s in shapes)
    return ShapeMismatchError(f"{kind}: incompatible shapes {pretty}")


def _scalar(g) -> float:
    return float(np.asarray(g).reshape(-1)[0])


# ---------------------------------------------------------------------------
# op implementations
#
# Each builder validates shapes, computes the forward value, and registers a
# vjp closure mapping the output gradient to per-input gradients (None for
# inputs that do not require grad).


def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    if ad.ndim not in (1, 2) or bd.ndim not in (1, 2):
        raise _shape_err("matmul", ad.shape, bd.shape)
    if (ad.shape[-1] if ad.ndim else 0) != (bd.shape[0] if bd.ndim else 0):
        raise _shape_err("matmul", ad.shape, bd.shape)
    _check_finite("matmul", ad, bd)
    out = Tensor(ad @ bd, a.requires_grad or b.requires_grad)

    def vjp(g):
        ga = gb = None
        if a.requires_grad:
            if ad.ndim == 2 and bd.ndim == 2:
                ga = g @ bd.T
            elif ad.ndim == 2 and bd.ndim == 1:
                ga = np.outer(g, bd)
            elif ad.ndim == 1 and bd.ndim == 2:
                ga = bd @ g
            else:  # 1-D @ 1-D
                ga = g * bd
        if b.requires_grad:
            if ad.ndim == 2 and bd.ndim == 2:
                gb = ad.T @ g
            elif ad.ndim == 2 and bd.ndim == 1:
                gb = ad.T @ g
            elif ad.ndim == 1 and bd.ndim == 2:
                gb = np.outer(ad, g)
            else:
                gb = g * ad
        return ga, gb

    _record("matmul", (a, b), out, vjp)
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise _shape_err("add", a.data.shape, b.data.shape)
    _check_finite("add", a.data, b.data)
    out = Tensor(a.data + b.data, a.requires_grad or b.requires_grad)

    def vjp(g):
        return (g if a.requires_grad else None, g if b.requires_grad else None)

    _record("add", (a, b), out, vjp)
    return out


def mul(a: Tensor, b) -> Tensor:
    """Elementwise product; ``b`` may be a Tensor of the same shape or a scalar."""
    if isinstance(b, Tensor):
        if a.data.shape != b.data.shape:
            raise _shape_err("mul", a.data.shape, b.data.shape)
        _check_finite("mul", a.data, b.data)
        out = Tensor(a.data * b.data, a.requires_grad or b.requires_grad)
        ad, bd = a.data, b.data

        def vjp(g):
            return (
                g * bd if a.requires_grad else None,
                g * ad if b.requires_grad else None,
            )

        _record("mul", (a, b), out, vjp)
        return out

    c = float(b)
    if not np.isfinite(c):
        raise NonFiniteError("mul: non-finite scalar operand")
    _check_finite("mul", a.data)
    out = Tensor(a.data * c, a.requires_grad)

    def vjp_scalar(g):
        return (g * c if a.requires_grad else None,)

    _record("mul", (a,), out, vjp_scalar)
    return out


def concat(parts, axis: int = 0) -> Tensor:
    parts = list(parts)
    if not parts:
        raise ValueError("concat: empty input list")
    datas = [p.data for p in parts]
    ndim = datas[0].ndim
    for d in datas[1:]:
        if d.ndim != ndim:
            raise _shape_err("concat", datas[0].shape, d.shape)
        for ax in range(ndim):
            if ax != axis and d.shape[ax] != datas[0].shape[ax]:
                raise _shape_err("concat", datas[0].shape, d.shape)
    _check_finite("concat", *datas)
    out = Tensor(np.concatenate(datas, axis=axis), any(p.requires_grad for p in parts))
    sizes = [d.shape[axis] for d in datas]

    def vjp(g):
        grads = []
        offset = 0
        for p, size in zip(parts, sizes):
            sl = [slice(None)] * ndim
            sl[axis] = slice(offset, offset + size)
            grads.append(g[tuple(sl)] if p.requires_grad else None)
            offset += size
        return tuple(grads)

    _record("concat", tuple(parts), out, vjp)
    return out


def _unary(kind: str, x: Tensor, fwd, dfwd) -> Tensor:
    _check_finite(kind, x.data)
    y = fwd(x.data)
    out = Tensor(y, x.requires_grad)

    def vjp(g):
        return (g * dfwd(x.data, y) if x.requires_grad else None,)

    _record(kind, (x,), out, vjp)
    return out


def sigmoid(x: Tensor) -> Tensor:
    def fwd(v):
        out = np.empty_like(v)
        pos = v >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
        ev = np.exp(v[~pos])
        out[~pos] = ev / (1.0 + ev)
        return out

    return _unary("sigmoid", x, fwd, lambda v, y: y * (1.0 - y))


def tanh(x: Tensor) -> Tensor:
    return _unary("tanh", x, np.tanh, lambda v, y: 1.0 - y * y)


def relu(x: Tensor) -> Tensor:
    # subgradient 0 at the kink
    return _unary("relu", x, lambda v: np.maximum(v, 0.0), lambda v, y: (v > 0).astype(np.float64))


def softmax_rows(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Row-wise softmax, optionally restricted to a boolean support mask.

    Off-support cells are zero in the output; a row with empty support comes
    out all-zero. The vjp is the standard softmax one, which is already
    correct on the restricted support.
    """
    if x.data.ndim != 2:
        raise _shape_err("softmax-rows", x.data.shape)
    _check_finite("softmax-rows", x.data)
    if mask is None:
        shifted = x.data - x.data.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        y = e / e.sum(axis=1, keepdims=True)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.data.shape:
            raise _shape_err("softmax-rows", x.data.shape, mask.shape)
        masked = np.where(mask, x.data, -np.inf)
        rowmax = masked.max(axis=1, keepdims=True)
        rowmax = np.where(np.isfinite(rowmax), rowmax, 0.0)  # empty-support rows
        e = np.where(mask, np.exp(x.data - rowmax), 0.0)
        denom = e.sum(axis=1, keepdims=True)
        y = np.divide(e, denom, out=np.zeros_like(e), where=denom > 0)
    out = Tensor(y, x.requires_grad)

    def vjp(g):
        if not x.requires_grad:
            return (None,)
        inner = (g * y).sum(axis=1, keepdims=True)
        return ((g - inner) * y,)

    _record("softmax-rows", (x,), out, vjp)
    return out


def reduce_sum(x: Tensor, axis: int | None = None) -> Tensor:
    _check_finite("sum", x.data)
    out = Tensor(x.data.sum(axis=axis), x.requires_grad)
    shape = x.data.shape

    def vjp(g):
        if not x.requires_grad:
            return (None,)
        if axis is None:
            return (np.full(shape, _scalar(g)),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    _record("sum", (x,), out, vjp)
    return out


def reduce_mean(x: Tensor, axis: int | None = None) -> Tensor:
    _check_finite("mean", x.data)
    out = Tensor(x.data.mean(axis=axis), x.requires_grad)
    shape = x.data.shape
    denom = x.data.size if axis is None else shape[axis]

    def vjp(g):
        if not x.requires_grad:
            return (None,)
        if axis is None:
            return (np.full(shape, _scalar(g) / denom),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy() / denom,)

    _record("mean", (x,), out, vjp)
    return out


def dropout_apply(x: Tensor, mask: np.ndarray) -> Tensor:
    """Multiply by a mask drawn outside the graph (0 or 1/keep per cell)."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != x.data.shape:
        raise _shape_err("dropout-mask-apply", x.data.shape, mask.shape)
    _check_finite("dropout-mask-apply", x.data, mask)
    out = Tensor(x.data * mask, x.requires_grad)

    def vjp(g):
        return (g * mask if x.requires_grad else None,)

    _record("dropout-mask-apply", (x,), out, vjp)
    return out


def slice_range(x: Tensor, start: int, stop: int, axis: int = 0) -> Tensor:
    if axis >= x.data.ndim or stop > x.data.shape[axis] or start < 0 or start >= stop:
        raise _shape_err(f"slice[{start}:{stop} axis={axis}]", x.data.shape)
    _check_finite("slice", x.data)
    sl = [slice(None)] * x.data.ndim
    sl[axis] = slice(start, stop)
    out = Tensor(x.data[tuple(sl)], x.requires_grad)
    shape = x.data.shape

    def vjp(g):
        if not x.requires_grad:
            return (None,)
        gx = np.zeros(shape)
        gx[tuple(sl)] = g
        return (gx,)

    _record("slice", (x,), out, vjp)
    return out


def row(x: Tensor, index: int) -> Tensor:
    """Single row of a 2-D tensor, axis dropped."""
    if x.data.ndim != 2 or not 0 <= index < x.data.shape[0]:
        raise _shape_err(f"slice[row {index}]", x.data.shape)
    _check_finite("slice", x.data)
    out = Tensor(x.data[index], x.requires_grad)
    shape = x.data.shape

    def vjp(g):
        if not x.requires_grad:
            return (None,)
        gx = np.zeros(shape)
        gx[index] = g
        return (gx,)

    _record("slice", (x,), out, vjp)
    return out


def gather_rows(x: Tensor, indices) -> Tensor:
    """Row lookup by index sequence; repeated indices accumulate on backward."""
    idx = np.asarray(indices, dtype=np.intp)
    if x.data.ndim != 2 or idx.ndim != 1:
        raise _shape_err("slice[gather]", x.data.shape)
    if idx.size and (idx.min() < 0 or idx.max() >= x.data.shape[0]):
        raise IndexError(f"slice[gather]: index out of range for shape {x.data.shape}")
    _check_finite("slice", x.data)
    out = Tensor(x.data[idx], x.requires_grad)
    shape = x.data.shape

    def vjp(g):
        if not x.requires_grad:
            return (None,)
        gx = np.zeros(shape)
        np.add.at(gx, idx, g)
        return (gx,)

    _record("slice", (x,), out, vjp)
    return out


def transpose(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise _shape_err("transpose", x.data.shape)
    _check_finite("transpose", x.data)
    out = Tensor(x.data.T, x.requires_grad)

    def vjp(g):
        return (g.T if x.requires_grad else None,)

    _record("transpose", (x,), out, vjp)
    return out


def bce_with_logits(logits: Tensor, targets) -> Tensor:
    """Summed binary cross-entropy from logits, in the stable softplus form.

    Returns the minimized quantity sum(softplus(z) - y*z), which is the
    negated log-likelihood; it is non-negative and finite for finite logits.
    """
    y = targets.data if isinstance(targets, Tensor) else np.asarray(targets, dtype=np.float64)
    z = logits.data
    if z.shape != y.shape:
        raise _shape_err("bce-logits", z.shape, y.shape)
    _check_finite("bce-logits", z, y)
    softplus = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    out = Tensor(np.sum(softplus - y * z), logits.requires_grad)

    def vjp(g):
        if not logits.requires_grad:
            return (None,)
        sig = np.empty_like(z)
        pos = z >= 0
        sig[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        sig[~pos] = ez / (1.0 + ez)
        return (_scalar(g) * (sig - y),)

    _record("bce-logits", (logits,), out, vjp)
    return out


def lstm_seq(x: Tensor, wx: Tensor, wh: Tensor, b: Tensor, reverse: bool = False) -> Tensor:
    """Fused single-direction LSTM over a T x d_in sequence; returns T x h states.

    Delegates to the kernel backend (compiled extension when available, numpy
    otherwise); the hand-derived backward is checked against the equivalent
    chain of primitive ops in the test suite.
    """
    from .kernels import lstm_backward, lstm_forward

    if x.data.ndim != 2 or wx.data.ndim != 2 or x.data.shape[1] != wx.data.shape[1]:
        raise _shape_err("lstm-seq", x.data.shape, wx.data.shape)
    if wh.data.ndim != 2 or wx.data.shape[0] != wh.data.shape[0] or b.data.shape != (wx.data.shape[0],):
        raise _shape_err("lstm-seq", wh.data.shape, b.data.shape)
    if wx.data.shape[0] != 4 * wh.data.shape[1]:
        raise _shape_err("lstm-seq", wx.data.shape, wh.data.shape)
    _check_finite("lstm-seq", x.data, wx.data, wh.data, b.data)
    h_states, cache = lstm_forward(x.data, wx.data, wh.data, b.data, reverse)
    if not np.all(np.isfinite(h_states)):
        raise NonFiniteError("lstm-seq: non-finite hidden state (divergence)")
    rg = x.requires_grad or wx.requires_grad or wh.requires_grad or b.requires_grad
    out = Tensor(h_states, rg)

    def vjp(g):
        dx, dwx, dwh, db = lstm_backward(cache, np.ascontiguousarray(g))
        return (
            dx if x.requires_grad else None,
            dwx if wx.requires_grad else None,
            dwh if wh.requires_grad else None,
            db if b.requires_grad else None,
        )

    _record("lstm-seq", (x, wx, wh, b), out, vjp)
    return out


_DISPATCH = {
    "matmul": matmul,
    "add": add,
    "mul": mul,
    "concat": lambda *xs, axis=0: concat(xs, axis=axis),
    "sigmoid": sigmoid,
    "tanh": tanh,
    "relu": relu,
    "softmax-rows": softmax_rows,
    "mean": reduce_mean,
    "sum": reduce_sum,
    "dropout-mask-apply": dropout_apply,
    "transpose": transpose,
    "bce-logits": bce_with_logits,
    "lstm-seq": lstm_seq,
}


def forward_op(kind: str, *inputs, **kwargs) -> Tensor:
    """Uniform dispatch by op kind; ``slice`` selects its mode from kwargs."""
    if kind == "slice":
        if "indices" in kwargs:
            return gather_rows(*inputs, kwargs["indices"])
        if "index" in kwargs:
            return row(*inputs, kwargs["index"])
        return slice_range(*inputs, **kwargs)
    try:
        fn = _DISPATCH[kind]
    except KeyError:
        raise ValueError(f"unknown op kind: {kind!r}") from None
    return fn(*inputs, **kwargs)


def backward(graph: Graph, root: Tensor) -> None:
    """Reverse sweep from a scalar root; grads accumulate into leaves."""
    if graph.consumed:
        raise GraphConsumedError("backward: graph already consumed")
    if root.data.size != 1:
        raise ValueError(f"backward: root must be scalar, got shape {root.shape}")
    graph.consumed = True
    root.accumulate(np.ones_like(root.data))
    for node in reversed(graph.nodes):
        g = node.output.grad
        if g is None:
            continue
        for t, gt in zip(node.inputs, node.vjp(g)):
            if gt is not None:
                if not np.all(np.isfinite(gt)):
                    raise NonFiniteError(f"{node.kind}: non-finite gradient")
                t.accumulate(gt.reshape(t.data.shape))


def finite_difference_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar-valued f at x, coordinate-wise."""
    if h <= 0:
        raise ValueError("finite_difference_grad: h must be positive")
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteError("finite_difference_grad: non-finite function value")
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad
