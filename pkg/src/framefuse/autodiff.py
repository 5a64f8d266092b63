"""Dense float64 tensors with taped reverse-mode differentiation.

Forward ops execute eagerly on numpy arrays. When a Tape is active and an
input is connected to a watched leaf, the op appends a node (op name, input
ids, output id, gradient closure) to the tape. backward() walks the node list
once in reverse. With no active tape the ops are plain forward arithmetic,
which is what evaluation and finite differences use.
"""
from __future__ import annotations

import itertools
import math
from typing import Callable, Sequence

import numpy as np

from .errors import AllMaskedRow, NotScalarLoss, ShapeMismatch

# Additive mask sentinel for blocked attention entries. exp(x - rowmax)
# underflows to exactly 0.0 for x this far below any finite row max, so
# blocked positions get weight exactly zero rather than merely small.
MASK_BLOCKED = -1e30

GELU_COEFF = 0.7978845608028654  # sqrt(2/pi)
_GELU_CUBIC = 0.044715

_debug_checks = False


def set_debug_checks(on: bool) -> None:
    """Enable per-op finiteness asserts and the blocked-weight assert."""
    global _debug_checks
    _debug_checks = bool(on)


class Tensor:
    """Dense row-major float64 array. Treated as immutable once built."""

    __slots__ = ("data", "requires_grad", "tid")
    _ids = itertools.count()

    def __init__(self, data, requires_grad: bool = False):
        # asarray with order="C" keeps 0-d shapes; ascontiguousarray would
        # promote scalars to shape (1,)
        arr = np.asarray(data, dtype=np.float64, order="C")
        if arr.ndim > 0 and min(arr.shape) < 1:
            raise ShapeMismatch(f"zero-sized extent in shape {arr.shape}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.tid = next(Tensor._ids)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeMismatch(f"item() on shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={tuple(self.shape)}, requires_grad={self.requires_grad})"

    # light operator sugar used by tests and the odd internal spot
    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return add(self, scale(other, -1.0))

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return multiply(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)


class Node:
    __slots__ = ("op", "input_ids", "output_id", "grad_fn")

    def __init__(self, op: str, input_ids: tuple[int, ...], output_id: int,
                 grad_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]]):
        self.op = op
        self.input_ids = input_ids
        self.output_id = output_id
        self.grad_fn = grad_fn


_TAPES: list["Tape"] = []


class Tape:
    """Wengert list. Use as a context manager around the forward pass."""

    def __init__(self):
        self.nodes: list[Node] = []
        self._live: set[int] = set()
        self._leaves: dict[int, Tensor] = {}

    def watch(self, *tensors: Tensor) -> None:
        for t in tensors:
            self._leaves[t.tid] = t
            self._live.add(t.tid)

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> bool:
        popped = _TAPES.pop()
        assert popped is self, "tapes must unwind in LIFO order"
        return False


def _active_tape() -> Tape | None:
    return _TAPES[-1] if _TAPES else None


def _finish(op: str, inputs: Sequence[Tensor], out_data: np.ndarray, grad_fn) -> Tensor:
    out = Tensor(out_data)
    if _debug_checks and not np.all(np.isfinite(out.data)):
        raise FloatingPointError(f"non-finite values out of op '{op}'")
    tape = _active_tape()
    if tape is not None:
        tracked = any(t.requires_grad or t.tid in tape._live for t in inputs)
        if tracked:
            for t in inputs:
                if t.requires_grad and t.tid not in tape._live:
                    tape.watch(t)
            tape.nodes.append(Node(op, tuple(t.tid for t in inputs), out.tid, grad_fn))
            tape._live.add(out.tid)
    return out


def _sum_to(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Fold a broadcast gradient back onto `shape`."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


class Gradients:
    """backward() result: per-leaf gradient arrays, zeros for unreached leaves."""

    def __init__(self, by_tid: dict[int, np.ndarray], leaves: dict[int, Tensor]):
        self._by_tid = by_tid
        self._leaves = leaves

    def __getitem__(self, t: Tensor) -> np.ndarray:
        g = self._by_tid.get(t.tid)
        if g is None:
            return np.zeros_like(t.data)
        return np.broadcast_to(g, t.data.shape).astype(np.float64, copy=False)

    def __contains__(self, t: Tensor) -> bool:
        return t.tid in self._by_tid


def backward(tape: Tape, loss: Tensor) -> Gradients:
    """Reverse sweep; every node visited exactly once.

    `loss` must be a rank-0 scalar. Returns gradients for every watched leaf;
    leaves on no path to the loss get zeros.
    """
    if loss.shape != ():
        raise NotScalarLoss(f"loss has shape {loss.shape}, expected a scalar")
    adjoint: dict[int, np.ndarray] = {loss.tid: np.array(1.0)}
    for node in reversed(tape.nodes):
        g = adjoint.get(node.output_id)
        if g is None:
            continue
        gs = node.grad_fn(g)
        for tid, gi in zip(node.input_ids, gs):
            if gi is None:
                continue
            acc = adjoint.get(tid)
            adjoint[tid] = gi if acc is None else acc + gi
    return Gradients({tid: adjoint[tid] for tid in tape._leaves if tid in adjoint},
                     tape._leaves)


# ---- elementwise and structural ops ----

def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data + b.data
    except ValueError:
        raise ShapeMismatch(f"add {a.shape} vs {b.shape}") from None

    def grad_fn(g):
        return _sum_to(g, a.shape), _sum_to(g, b.shape)

    return _finish("add", (a, b), out, grad_fn)


def multiply(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data * b.data
    except ValueError:
        raise ShapeMismatch(f"multiply {a.shape} vs {b.shape}") from None
    ad, bd = a.data, b.data

    def grad_fn(g):
        return _sum_to(g * bd, a.shape), _sum_to(g * ad, b.shape)

    return _finish("multiply", (a, b), out, grad_fn)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)

    def grad_fn(g):
        return (g * s,)

    return _finish("scale", (a,), a.data * s, grad_fn)


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(int(e) for e in shape)
    if math.prod(shape) != x.size:
        raise ShapeMismatch(f"reshape {x.shape} -> {shape}")
    old = x.shape

    def grad_fn(g):
        return (g.reshape(old),)

    return _finish("reshape", (x,), x.data.reshape(shape), grad_fn)


def permute(x: Tensor, axes) -> Tensor:
    axes = tuple(int(a) for a in axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeMismatch(f"permute axes {axes} for rank {x.ndim}")
    inv = tuple(np.argsort(axes))

    def grad_fn(g):
        return (g.transpose(inv),)

    return _finish("permute", (x,), np.ascontiguousarray(x.data.transpose(axes)), grad_fn)


def swap_last_two(x: Tensor) -> Tensor:
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return permute(x, axes)


def concat_axis(tensors: Sequence[Tensor], axis: int) -> Tensor:
    if not tensors:
        raise ShapeMismatch("concat of zero tensors")
    axis = axis % tensors[0].ndim
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeMismatch(f"concat shapes {[t.shape for t in tensors]} axis {axis}") from None
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def grad_fn(g):
        return tuple(np.split(g, splits, axis=axis))

    return _finish("concat_axis", tuple(tensors), out, grad_fn)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    axis = axis % x.ndim
    if start < 0 or start + length > x.shape[axis]:
        raise ShapeMismatch(f"narrow [{start}:{start + length}] on extent {x.shape[axis]}")
    idx = tuple(slice(None) if i != axis else slice(start, start + length)
                for i in range(x.ndim))
    shape = x.shape

    def grad_fn(g):
        full = np.zeros(shape, dtype=np.float64)
        full[idx] = g
        return (full,)

    return _finish("narrow", (x,), np.ascontiguousarray(x.data[idx]), grad_fn)


def mean_over_axis(x: Tensor, axis: int) -> Tensor:
    axis = axis % x.ndim
    n = x.shape[axis]

    def grad_fn(g):
        return (np.repeat(np.expand_dims(g / n, axis), n, axis=axis),)

    return _finish("mean_over_axis", (x,), x.data.mean(axis=axis), grad_fn)


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape

    def grad_fn(g):
        return (np.broadcast_to(g, shape).copy(),)

    return _finish("sum_all", (x,), np.asarray(x.data.sum()), grad_fn)


# ---- linear algebra ----

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product. Batch prefixes must match exactly, or either
    operand may be a plain rank-2 matrix shared across the other's batch."""
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeMismatch(f"matmul needs rank >= 2, got {a.shape} x {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul inner extents differ: {a.shape} x {b.shape}")
    ba, bb = a.shape[:-2], b.shape[:-2]
    if ba and bb and ba != bb:
        raise ShapeMismatch(f"matmul batch prefixes differ: {a.shape} x {b.shape}")
    ad, bd = a.data, b.data
    out = ad @ bd

    def grad_fn(g):
        ga = _sum_to(g @ np.swapaxes(bd, -1, -2), a.shape)
        gb = _sum_to(np.swapaxes(ad, -1, -2) @ g, b.shape)
        return ga, gb

    return _finish("matmul", (a, b), out, grad_fn)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """x [..., nin] @ w [nin, nout] (+ b [nout])."""
    if w.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise ShapeMismatch(f"linear {x.shape} @ {w.shape}")
    out = matmul(x, w) if x.ndim >= 2 else matmul(reshape(x, (1, x.shape[-1])), w)
    if x.ndim < 2:
        out = reshape(out, (w.shape[1],))
    if b is not None:
        if b.shape != (w.shape[1],):
            raise ShapeMismatch(f"linear bias {b.shape} for {w.shape}")
        out = add(out, b)
    return out


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """table [V, h], ids int array [...] -> [..., h]."""
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise ShapeMismatch("embedding ids must be integers")
    if table.ndim != 2:
        raise ShapeMismatch(f"embedding table must be rank 2, got {table.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeMismatch(f"embedding id out of range for vocab {table.shape[0]}")
    tshape = table.shape

    def grad_fn(g):
        gt = np.zeros(tshape, dtype=np.float64)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, tshape[1]))
        return (gt,)

    return _finish("embedding_lookup", (table,), table.data[ids], grad_fn)


# ---- nonlinearities and norms ----

def gelu(x: Tensor) -> Tensor:
    """tanh-form gelu: 0.5*x*(1 + tanh(c*(x + 0.044715*x^3)))."""
    xd = x.data
    inner = GELU_COEFF * (xd + _GELU_CUBIC * xd ** 3)
    t = np.tanh(inner)
    out = 0.5 * xd * (1.0 + t)

    def grad_fn(g):
        sech2 = 1.0 - t * t
        local = 0.5 * (1.0 + t) + 0.5 * xd * sech2 * GELU_COEFF * (1.0 + 3.0 * _GELU_CUBIC * xd ** 2)
        return (g * local,)

    return _finish("gelu", (x,), out, grad_fn)


def softmax_lastdim(x: Tensor) -> Tensor:
    xd = x.data
    m = xd.max(axis=-1, keepdims=True)
    e = np.exp(xd - m)
    y = e / e.sum(axis=-1, keepdims=True)

    def grad_fn(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return _finish("softmax_lastdim", (x,), y, grad_fn)


def rms_norm(x: Tensor, gain: Tensor, eps: float = 1e-6) -> Tensor:
    """x / sqrt(mean(x^2, last) + eps) * gain, gain shaped [last extent]."""
    if gain.shape != (x.shape[-1],):
        raise ShapeMismatch(f"rms_norm gain {gain.shape} for input {x.shape}")
    xd = x.data
    h = x.shape[-1]
    ms = (xd * xd).mean(axis=-1, keepdims=True)
    r = 1.0 / np.sqrt(ms + eps)
    gd = gain.data
    out = xd * r * gd

    def grad_fn(g):
        u = g * gd
        gx = u * r - xd * (r ** 3 / h) * (u * xd).sum(axis=-1, keepdims=True)
        ggain = _sum_to(g * xd * r, gain.shape)
        return gx, ggain

    return _finish("rms_norm", (x, gain), out, grad_fn)


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean negative log-likelihood. logits [B, C] (or [C]), integer targets [B]."""
    squeeze = logits.ndim == 1
    ld = logits.data.reshape(1, -1) if squeeze else logits.data
    targets = np.atleast_1d(np.asarray(targets))
    if not np.issubdtype(targets.dtype, np.integer):
        raise ShapeMismatch("cross_entropy targets must be integers")
    if ld.ndim != 2 or targets.shape != (ld.shape[0],):
        raise ShapeMismatch(f"cross_entropy logits {logits.shape} targets {targets.shape}")
    if targets.min() < 0 or targets.max() >= ld.shape[1]:
        raise ShapeMismatch(f"target class out of range for {ld.shape[1]} classes")
    bsz = ld.shape[0]
    m = ld.max(axis=-1, keepdims=True)
    z = ld - m
    lse = m[:, 0] + np.log(np.exp(z).sum(axis=-1))
    nll = lse - ld[np.arange(bsz), targets]
    out = np.asarray(nll.mean())
    p = np.exp(z) / np.exp(z).sum(axis=-1, keepdims=True)
    lshape = logits.shape

    def grad_fn(g):
        gl = p.copy()
        gl[np.arange(bsz), targets] -= 1.0
        gl *= float(g) / bsz
        return (gl.reshape(lshape),)

    return _finish("cross_entropy", (logits,), out, grad_fn)


# ---- attention ----

def attention(q: Tensor, k: Tensor, v: Tensor, mask: Tensor | None = None,
              return_weights: bool = False):
    """softmax(q k^T / sqrt(d) + mask) v with an additive 0/MASK_BLOCKED mask.

    q [..., Tq, d], k [..., Tk, d], v [..., Tk, dv]; mask broadcasts onto the
    score shape [..., Tq, Tk]. Raises AllMaskedRow if any query row has no
    allowed key. Blocked entries receive exactly zero weight.
    """
    if q.shape[-1] != k.shape[-1]:
        raise ShapeMismatch(f"attention head dims differ: q {q.shape} k {k.shape}")
    if k.shape[-2] != v.shape[-2]:
        raise ShapeMismatch(f"attention key/value counts differ: k {k.shape} v {v.shape}")
    if mask is not None:
        if mask.shape[-2:] != (q.shape[-2], k.shape[-2]):
            raise ShapeMismatch(f"mask {mask.shape} for scores [..., {q.shape[-2]}, {k.shape[-2]}]")
        if np.any(mask.data.max(axis=-1) <= MASK_BLOCKED * 0.5):
            raise AllMaskedRow("a query row blocks every key")
    d = q.shape[-1]
    scores = scale(matmul(q, swap_last_two(k)), 1.0 / math.sqrt(d))
    if mask is not None:
        scores = add(scores, mask)
    weights = softmax_lastdim(scores)
    if _debug_checks and mask is not None:
        blocked = np.broadcast_to(mask.data <= MASK_BLOCKED * 0.5, weights.shape)
        if blocked.any() and weights.data[blocked].max(initial=0.0) >= 1e-20:
            raise FloatingPointError("blocked attention weight above 1e-20")
    out = matmul(weights, v)
    if return_weights:
        return out, weights
    return out


# ---- construction helpers ----

def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def param(data) -> Tensor:
    return Tensor(data, requires_grad=True)
