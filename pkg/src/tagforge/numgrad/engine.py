"""Dense f64 tensors with a recorded operation tape and reverse-mode gradients.

Every operation builds a new Tensor holding references to its inputs and a
local gradient rule. ``backward(loss)`` walks the recorded operations in
reverse creation order, accumulating gradients by sum across fan-out, then
detaches the visited graph so a tape is consumed exactly once.
"""

from __future__ import annotations

import itertools
import warnings

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


_creation_counter = itertools.count()


class Tensor:
    """A numpy f64 array plus the tape record that produced it.

    Leaf tensors (parameters) are created directly; ``constant`` wraps
    values that should never receive gradients (masks, positional tables).
    """

    __slots__ = ("data", "grad", "name", "const", "_parents", "_backward", "_order")

    def __init__(self, data, parents=(), backward=None, name=None, const=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.name = name
        self.const = const
        self._parents = tuple(parents)
        self._backward = backward
        self._order = next(_creation_counter)

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
        return float(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    # -- operator sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division is not supported; multiply by a reciprocal")
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)


def constant(data, name=None) -> Tensor:
    """A tensor excluded from gradient accumulation."""
    return Tensor(data, name=name, const=True)


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return constant(value)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.const:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient over the axes numpy broadcasting introduced."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def backward(loss: Tensor) -> None:
    """Propagate gradients from a scalar loss to every reachable tensor.

    Gradients accumulate by summation wherever a tensor feeds several
    operations. Afterward the visited portion of the tape is detached, so
    a second backward over the same graph is a no-op.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    nodes: list[Tensor] = []
    seen: set[int] = set()
    stack = [loss]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        nodes.append(node)
        stack.extend(node._parents)
    nodes.sort(key=lambda n: n._order, reverse=True)
    loss.grad = np.ones_like(loss.data)
    for node in nodes:
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    for node in nodes:
        if node._parents:
            node._parents = ()
            node._backward = None


def zero_grad(params) -> None:
    for p in params:
        p.grad = None


# -- arithmetic ---------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.data + b.data
    except ValueError:
        raise ShapeError(f"cannot add shapes {a.data.shape} and {b.data.shape}") from None

    def rule(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return Tensor(out, (a, b), rule)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.data * b.data
    except ValueError:
        raise ShapeError(f"cannot multiply shapes {a.data.shape} and {b.data.shape}") from None

    def rule(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return Tensor(out, (a, b), rule)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul needs 2-D or higher operands, got {a.data.shape} and {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.data.shape} vs {b.data.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeError(f"matmul batch dimensions differ: {a.data.shape} vs {b.data.shape}") from None

    def rule(g):
        _accumulate(a, _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.data.shape))
        _accumulate(b, _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.data.shape))

    return Tensor(out, (a, b), rule)


# -- structure ----------------------------------------------------------


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    out = x.data.reshape(shape)

    def rule(g):
        _accumulate(x, g.reshape(x.data.shape))

    return Tensor(out, (x,), rule)


def transpose(x: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.data.ndim)))
    axes = tuple(axes)
    inverse = tuple(int(i) for i in np.argsort(axes))
    out = np.transpose(x.data, axes)

    def rule(g):
        _accumulate(x, np.transpose(g, inverse))

    return Tensor(out, (x,), rule)


def take(x: Tensor, key) -> Tensor:
    """Basic slicing/indexing; the gradient scatters back into place."""
    out = x.data[key]

    def rule(g):
        buf = np.zeros_like(x.data)
        buf[key] += g
        _accumulate(x, buf)

    return Tensor(out, (x,), rule)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def rule(g):
        for t, piece in zip(tensors, np.split(g, offsets, axis=axis)):
            _accumulate(t, piece)

    return Tensor(out, tuple(tensors), rule)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.stack([t.data for t in tensors], axis=axis)

    def rule(g):
        for i, t in enumerate(tensors):
            _accumulate(t, np.take(g, i, axis=axis))

    return Tensor(out, tuple(tensors), rule)


def embedding_gather(table: Tensor, ids) -> Tensor:
    """Row lookup into an embedding table; gradient is a scatter-add."""
    ids = np.asarray(ids, dtype=np.int64)
    out = table.data[ids]

    def rule(g):
        buf = np.zeros_like(table.data)
        np.add.at(buf, ids, g)
        _accumulate(table, buf)

    return Tensor(out, (table,), rule)


# -- reductions ---------------------------------------------------------


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def rule(g):
        if axis is None:
            _accumulate(x, np.broadcast_to(g, x.data.shape).copy())
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(x, np.broadcast_to(g, x.data.shape).copy())

    return Tensor(out, (x,), rule)


def tmean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = x.data.size
    else:
        count = x.data.shape[axis]
    return mul(tsum(x, axis=axis, keepdims=keepdims), 1.0 / count)


# -- nonlinearities -----------------------------------------------------


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = np.where(mask, x.data, 0.0)

    def rule(g):
        _accumulate(x, g * mask)

    return Tensor(out, (x,), rule)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def rule(g):
        _accumulate(x, g * (1.0 - out * out))

    return Tensor(out, (x,), rule)


def sigmoid(x: Tensor) -> Tensor:
    out = np.empty_like(x.data)
    pos = x.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ex = np.exp(x.data[~pos])
    out[~pos] = ex / (1.0 + ex)

    def rule(g):
        _accumulate(x, g * out * (1.0 - out))

    return Tensor(out, (x,), rule)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-shifted softmax along ``axis``; rows sum to one."""
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def rule(g):
        inner = (g * s).sum(axis=axis, keepdims=True)
        _accumulate(x, s * (g - inner))

    return Tensor(s, (x,), rule)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale and shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = xhat * gamma.data + beta.data

    def rule(g):
        lead = tuple(range(g.ndim - 1))
        _accumulate(gamma, _unbroadcast((g * xhat).sum(axis=lead), gamma.data.shape))
        _accumulate(beta, _unbroadcast(g.sum(axis=lead), beta.data.shape))
        dxhat = g * gamma.data
        term = dxhat.mean(axis=-1, keepdims=True) + xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        _accumulate(x, inv * (dxhat - term))

    return Tensor(out, (x, gamma, beta), rule)


def dropout(x: Tensor, p: float, rng: np.random.Generator, train: bool = True) -> Tensor:
    """Inverted dropout: scales kept activations by 1/(1-p) at train time.

    With ``train=False`` or ``p=0`` this is the identity, so inference is a
    pure forward pass.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if not train or p == 0.0:
        return x
    mask = (rng.random(x.data.shape) >= p) / (1.0 - p)
    out = x.data * mask

    def rule(g):
        _accumulate(x, g * mask)

    return Tensor(out, (x,), rule)


def cross_entropy_masked(logits: Tensor, labels, ignore_label: int = -1) -> Tensor:
    """Mean cross-entropy over positions whose label is not ``ignore_label``.

    ``logits`` has classes on the last axis; ``labels`` holds integer class
    ids with the same leading shape. Logits at ignored positions influence
    neither the value nor any gradient. An all-ignored batch yields loss 0
    with zero gradient and emits a warning.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != logits.data.shape[:-1]:
        raise ShapeError(
            f"labels shape {labels.shape} does not match logits {logits.data.shape}"
        )
    num_classes = logits.data.shape[-1]
    flat = logits.data.reshape(-1, num_classes)
    lab = labels.reshape(-1)
    valid = lab != ignore_label
    n = int(valid.sum())
    if n == 0:
        warnings.warn("cross_entropy_masked: every position is ignored", stacklevel=2)

        def zero_rule(g):
            _accumulate(logits, np.zeros_like(logits.data))

        return Tensor(0.0, (logits,), zero_rule)

    shifted = flat - flat.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - logz
    idx = np.nonzero(valid)[0]
    loss = -logp[idx, lab[idx]].sum() / n

    def rule(g):
        delta = np.zeros_like(flat)
        delta[idx] = np.exp(logp[idx])
        delta[idx, lab[idx]] -= 1.0
        _accumulate(logits, (float(g) / n) * delta.reshape(logits.data.shape))

    return Tensor(loss, (logits,), rule)
