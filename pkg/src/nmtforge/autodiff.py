"""Minimal dense-tensor arithmetic with reverse-mode gradients.

Tensors wrap row-major numpy arrays (float32 by default; ops preserve the
input dtype so oracle code can drive the same graph in float64).  Every
differentiable op records a backward closure on a tape; ``backward`` walks
the tape in reverse topological order.  Reduction order is numpy's
row-major order throughout, which keeps results bit-reproducible for
fixed inputs on one platform.
"""

import contextlib

import numpy as np

from .errors import ConfigError, IntegrityError, ShapeError, StateError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (inference / numeric oracles)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A value node: numpy data plus an optional gradient accumulator."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_backward_done")

    def __init__(self, data, requires_grad=False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(arr) if requires_grad else None
        self._parents = ()
        self._backward = None
        self._backward_done = False

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def __repr__(self):
        return "Tensor(shape=%r, dtype=%s, grad=%s)" % (
            self.shape,
            self.data.dtype,
            self.requires_grad,
        )

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(_as_tensor(other, self.dtype), -1.0))

    def __rsub__(self, other):
        return add(_as_tensor(other, self.dtype), mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)


def _as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype if dtype is not None else np.float32))


def _make(data, parents, backward):
    """Create a result node, recording the tape edge when grads are live."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.grad = np.zeros_like(out.data)
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# -- elementwise ops ---------------------------------------------------------


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b, a.dtype)
    out_data = a.data + b.data

    def backward(grad):
        if a.requires_grad:
            a.grad += _unbroadcast(grad, a.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(grad, b.shape)

    return _make(out_data, (a, b), backward)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b, a.dtype)
    out_data = a.data * b.data

    def backward(grad):
        if a.requires_grad:
            a.grad += _unbroadcast(grad * b.data, a.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(grad * a.data, b.shape)

    return _make(out_data, (a, b), backward)


def power(a, exponent):
    a = _as_tensor(a)
    exponent = float(exponent)
    out_data = a.data**exponent

    def backward(grad):
        if a.requires_grad:
            a.grad += grad * exponent * a.data ** (exponent - 1.0)

    return _make(out_data, (a,), backward)


def tanh(a):
    a = _as_tensor(a)
    out_data = np.tanh(a.data)

    def backward(grad):
        if a.requires_grad:
            a.grad += grad * (1.0 - out_data * out_data)

    return _make(out_data, (a,), backward)


def sigmoid(a):
    a = _as_tensor(a)
    # split by sign to stay overflow-free in float32
    x = a.data
    out_data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out_data = out_data.astype(x.dtype, copy=False)

    def backward(grad):
        if a.requires_grad:
            a.grad += grad * out_data * (1.0 - out_data)

    return _make(out_data, (a,), backward)


def relu(a):
    a = _as_tensor(a)
    out_data = np.maximum(a.data, 0)

    def backward(grad):
        if a.requires_grad:
            a.grad += grad * (a.data > 0)

    return _make(out_data, (a,), backward)


# -- shape ops ---------------------------------------------------------------


def reshape(a, shape):
    a = _as_tensor(a)
    out_data = a.data.reshape(shape)

    def backward(grad):
        if a.requires_grad:
            a.grad += grad.reshape(a.shape)

    return _make(out_data, (a,), backward)


def transpose(a, axes):
    a = _as_tensor(a)
    out_data = np.transpose(a.data, axes)
    inverse = np.argsort(axes)

    def backward(grad):
        if a.requires_grad:
            a.grad += np.transpose(grad, inverse)

    return _make(out_data, (a,), backward)


def concat(tensors, axis):
    tensors = [_as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(grad):
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                index = [slice(None)] * grad.ndim
                index[axis] = slice(start, stop)
                t.grad += grad[tuple(index)]

    return _make(out_data, tuple(tensors), backward)


# -- reductions --------------------------------------------------------------


def sum_(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(grad):
        if a.requires_grad:
            g = grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a.grad += np.broadcast_to(g, a.shape)

    return _make(out_data, (a,), backward)


def mean_(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    count = a.data.size if axis is None else a.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


# -- linear algebra ----------------------------------------------------------


def matmul(a, b):
    """Matrix product with numpy batch broadcasting over leading axes."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError("matmul needs >=2-D operands: %r @ %r" % (a.shape, b.shape))
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul inner dims disagree: %r @ %r" % (a.shape, b.shape))
    out_data = np.matmul(a.data, b.data)

    def backward(grad):
        if a.requires_grad:
            ga = np.matmul(grad, np.swapaxes(b.data, -1, -2))
            a.grad += _unbroadcast(ga, a.shape)
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), grad)
            b.grad += _unbroadcast(gb, b.shape)

    return _make(out_data, (a, b), backward)


# -- softmax family ----------------------------------------------------------


def _softmax_data(x, axis):
    """Stable softmax on raw arrays; fully -inf slices come back as zeros."""
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(x - m)
    z = e.sum(axis=axis, keepdims=True)
    z = np.where(z == 0.0, 1.0, z)
    return (e / z).astype(x.dtype, copy=False)


def softmax(a, axis=-1):
    """Max-subtracted softmax along ``axis``; each finite slice sums to 1."""
    a = _as_tensor(a)
    out_data = _softmax_data(a.data, axis)

    def backward(grad):
        if a.requires_grad:
            inner = (grad * out_data).sum(axis=axis, keepdims=True)
            a.grad += out_data * (grad - inner)

    return _make(out_data, (a,), backward)


def _log_softmax_data(x, axis):
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    shifted = x - m
    log_z = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    return (shifted - log_z).astype(x.dtype, copy=False)


def log_softmax(a, axis=-1):
    a = _as_tensor(a)
    out_data = _log_softmax_data(a.data, axis)
    soft = np.exp(out_data)

    def backward(grad):
        if a.requires_grad:
            a.grad += grad - soft * grad.sum(axis=axis, keepdims=True)

    return _make(out_data, (a,), backward)


# -- lookup / regularization -------------------------------------------------


def embedding(table, ids):
    """Row gather: table (V, D), ids any integer shape; result ids.shape + (D,)."""
    ids = np.asarray(ids)
    V = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= V):
        raise IndexError("token id out of range [0, %d)" % V)
    out_data = table.data[ids]

    def backward(grad):
        if table.requires_grad:
            np.add.at(table.grad, ids, grad)

    return _make(out_data, (table,), backward)


def dropout(a, p, rng):
    """Inverted dropout with a seeded generator; identity when p == 0 or rng is None."""
    a = _as_tensor(a)
    if rng is None or p <= 0.0:
        return a
    keep = (rng.random(a.shape) >= p).astype(a.dtype) / np.asarray(1.0 - p, dtype=a.dtype)

    def backward(grad):
        if a.requires_grad:
            a.grad += grad * keep

    return _make(a.data * keep, (a,), backward)


def layer_norm(a, gain, bias, eps=1e-5):
    """Normalize over the last axis, then scale and shift."""
    a = _as_tensor(a)
    mu = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out_data = xhat * gain.data + bias.data
    n = a.shape[-1]

    def backward(grad):
        dxhat = grad * gain.data
        if a.requires_grad:
            term = n * dxhat - dxhat.sum(axis=-1, keepdims=True)
            term -= xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
            a.grad += (inv_std / n) * term
        reduce_axes = tuple(range(grad.ndim - 1))
        if gain.requires_grad:
            gain.grad += (grad * xhat).sum(axis=reduce_axes)
        if bias.requires_grad:
            bias.grad += grad.sum(axis=reduce_axes)

    return _make(out_data, (a, gain, bias), backward)


# -- loss --------------------------------------------------------------------


def cross_entropy_smoothed(logits, gold, epsilon, pad_id):
    """Label-smoothed cross entropy, averaged over non-pad gold positions.

    The smoothed target puts 1 - epsilon on the gold class and
    epsilon / (V - 2) on every other class except pad.  Positions whose
    gold id equals pad_id are excluded from the mean.
    """
    if not 0.0 <= epsilon < 1.0:
        raise ConfigError("label smoothing must lie in [0, 1): %r" % epsilon)
    gold = np.asarray(gold)
    if logits.data.ndim != 2 or gold.ndim != 1 or gold.shape[0] != logits.shape[0]:
        raise ShapeError(
            "expected logits (tokens, vocab) with 1-D gold: %r vs %r" % (logits.shape, gold.shape)
        )
    V = logits.shape[1]
    if gold.size and (gold.min() < 0 or gold.max() >= V):
        raise IndexError("gold id out of range [0, %d)" % V)
    if epsilon > 0.0 and V < 3:
        raise ConfigError("label smoothing needs a vocabulary of at least 3 classes")

    mask = gold != pad_id
    n_tok = int(mask.sum())
    if n_tok == 0:
        return Tensor(np.zeros((), dtype=logits.dtype))

    logp = _log_softmax_data(logits.data, axis=-1)
    rows = np.arange(gold.shape[0])
    gold_logp = logp[rows, gold]
    if epsilon > 0.0:
        off_mass = epsilon / (V - 2)
        total_logp = logp.sum(axis=-1)
        pad_logp = logp[:, pad_id]
        # off-gold, off-pad mass; when gold == pad the row is masked out anyway
        other_logp = total_logp - gold_logp - np.where(gold == pad_id, 0.0, pad_logp)
        per_row = -((1.0 - epsilon) * gold_logp + off_mass * other_logp)
    else:
        per_row = -gold_logp
    loss_value = (per_row * mask).sum() / n_tok

    def backward(grad):
        if not logits.requires_grad:
            return
        q = np.zeros_like(logp)
        if epsilon > 0.0:
            q[mask] = epsilon / (V - 2)
            q[:, pad_id] = 0.0
        q[rows[mask], gold[mask]] = 1.0 - epsilon if epsilon > 0.0 else 1.0
        soft = np.exp(logp)
        d = (soft - q) * mask[:, None] / n_tok
        logits.grad += grad * d.astype(logits.dtype, copy=False)

    return _make(np.asarray(loss_value, dtype=logits.dtype), (logits,), backward)


# -- tape walk ---------------------------------------------------------------


def _topo_order(root):
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss):
    """Accumulate d(loss)/d(theta) into every reachable gradient buffer.

    Closures fold each node's accumulated grad into its parents, so one
    reverse-topological sweep suffices; parameters keep their sums.
    """
    if loss.data.size != 1:
        raise ShapeError("backward expects a scalar loss, got shape %r" % (loss.shape,))
    if not loss.requires_grad:
        raise StateError("loss does not depend on any trainable parameter")
    if loss._backward_done:
        raise StateError("backward already ran for this loss; reset gradients and rebuild")
    loss._backward_done = True

    loss.grad[...] = 1.0
    for node in reversed(_topo_order(loss)):
        if node._backward is not None:
            node._backward(node.grad)


# -- parameters --------------------------------------------------------------


class ParameterSet:
    """Named trainable tensors with parallel gradient accumulators."""

    def __init__(self):
        self._params = {}

    def add(self, name, array):
        if name in self._params:
            raise StateError("duplicate parameter name: %s" % name)
        t = Tensor(np.array(array), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __len__(self):
        return len(self._params)

    def names(self):
        return sorted(self._params)

    def items(self):
        return [(name, self._params[name]) for name in self.names()]

    def zero_grad(self):
        for _, t in self.items():
            t.grad[...] = 0.0

    def n_values(self):
        return sum(t.data.size for _, t in self.items())

    def value_dict(self):
        return {name: t.data.copy() for name, t in self.items()}

    def load_values(self, values):
        for name, t in self.items():
            src = values[name]
            if tuple(src.shape) != tuple(t.shape):
                raise ShapeError("parameter %s: shape %r vs %r" % (name, src.shape, t.shape))
            t.data[...] = src


def gradient_check(params, loss_fn, h=1e-3, max_coords_per_tensor=None, rng=None):
    """Max relative error between tape gradients and central differences.

    ``loss_fn`` must be a pure function of ``params`` returning a scalar
    Tensor.  Coordinates are exhaustive unless capped, in which case a
    seeded generator samples them.
    """
    params.zero_grad()
    backward(loss_fn())
    analytic = {name: t.grad.copy() for name, t in params.items()}

    worst = 0.0
    for name, t in params.items():
        flat = t.data.reshape(-1)
        n = flat.size
        if max_coords_per_tensor is not None and n > max_coords_per_tensor:
            picker = rng if rng is not None else np.random.default_rng(0)
            coords = picker.choice(n, size=max_coords_per_tensor, replace=False)
        else:
            coords = range(n)
        a_flat = analytic[name].reshape(-1)
        for i in coords:
            original = flat[i]
            with no_grad():
                flat[i] = original + h
                up = loss_fn().item()
                flat[i] = original - h
                down = loss_fn().item()
            flat[i] = original
            numeric = (up - down) / (2.0 * h)
            denom = max(abs(a_flat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(a_flat[i] - numeric) / denom)
    params.zero_grad()
    return worst


# -- tensor blob format -------------------------------------------------------

BLOB_DTYPE = "<f4"


def write_tensor_blob(arrays, blob_path):
    """Write named arrays as little-endian float32, returning the manifest map."""
    manifest = {}
    offset = 0
    with open(blob_path, "wb") as fh:
        for name in sorted(arrays):
            payload = np.ascontiguousarray(arrays[name], dtype=BLOB_DTYPE).tobytes()
            fh.write(payload)
            manifest[name] = {
                "shape": list(np.asarray(arrays[name]).shape),
                "byte_offset": offset,
                "byte_length": len(payload),
            }
            offset += len(payload)
    return manifest


def read_tensor_blob(blob_path, manifest):
    """Load arrays per the manifest; sizes are cross-checked against the blob."""
    with open(blob_path, "rb") as fh:
        blob = fh.read()
    arrays = {}
    for name, entry in manifest.items():
        start, length = entry["byte_offset"], entry["byte_length"]
        shape = tuple(entry["shape"])
        expected = int(np.prod(shape, dtype=np.int64)) * 4 if shape else 4
        if length != expected or start + length > len(blob):
            raise IntegrityError(
                "tensor %s: manifest claims %d bytes at %d, blob has %d"
                % (name, length, start, len(blob))
            )
        arrays[name] = np.frombuffer(blob[start : start + length], dtype=BLOB_DTYPE).reshape(shape).copy()
    return arrays
