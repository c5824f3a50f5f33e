"""Tape-based reverse-mode differentiation over numpy arrays.

Covers exactly the compositions this project trains: affine maps, LSTM cell
arithmetic, elementwise activations, and scalar losses. Vectors are 1-D
arrays; a batch stacks column vectors into a (dim, batch) array and every op
below handles both layouts. All math runs in float64.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """One node of the computation tape: a value plus its accumulated gradient.

    Leaf tensors wrap parameters or inputs; interior tensors remember their
    parents and how to push a gradient back to them.
    """

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents=(), backward=None):
        # float64 by default; extended precision is preserved so the
        # finite-difference checker can evaluate losses in long double.
        arr = np.asarray(data)
        if arr.dtype != np.longdouble:
            arr = np.asarray(arr, dtype=np.float64)
        self.data = arr
        self.grad = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        """Run reverse-mode accumulation from this scalar node."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss node")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape})"


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad = t.grad + g


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def matmul(w: Tensor, x: Tensor) -> Tensor:
    """w @ x for w (m, n) and x (n,) or (n, batch)."""
    out = Tensor(w.data @ x.data, (w, x))

    def backward(g):
        if x.data.ndim == 1:
            _accum(w, np.outer(g, x.data))
        else:
            _accum(w, g @ x.data.T)
        _accum(x, w.data.T @ g)

    out._backward = backward
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum of two same-shape tensors."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data + b.data, (a, b))

    def backward(g):
        _accum(a, g)
        _accum(b, g)

    out._backward = backward
    return out


def bias_add(y: Tensor, b: Tensor) -> Tensor:
    """Add a (m,) bias to y of shape (m,) or (m, batch)."""
    if y.data.ndim == 1:
        out = Tensor(y.data + b.data, (y, b))

        def backward(g):
            _accum(y, g)
            _accum(b, g)
    else:
        out = Tensor(y.data + b.data[:, None], (y, b))

        def backward(g):
            _accum(y, g)
            _accum(b, g.sum(axis=1))

    out._backward = backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of two same-shape tensors."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"mul shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data * b.data, (a, b))

    def backward(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    out._backward = backward
    return out


def scale(a: Tensor, k: float) -> Tensor:
    out = Tensor(a.data * k, (a,))

    def backward(g):
        _accum(a, g * k)

    out._backward = backward
    return out


def concat(a: Tensor, b: Tensor) -> Tensor:
    """Stack along axis 0; trailing batch axes must agree."""
    if a.data.ndim != b.data.ndim or a.data.shape[1:] != b.data.shape[1:]:
        raise ValueError(f"concat shape mismatch: {a.data.shape} vs {b.data.shape}")
    n = a.data.shape[0]
    out = Tensor(np.concatenate([a.data, b.data], axis=0), (a, b))

    def backward(g):
        _accum(a, g[:n])
        _accum(b, g[n:])

    out._backward = backward
    return out


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    s = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                 np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    out = Tensor(s, (x,))

    def backward(g):
        _accum(x, g * s * (1.0 - s))

    out._backward = backward
    return out


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    out = Tensor(t, (x,))

    def backward(g):
        _accum(x, g * (1.0 - t * t))

    out._backward = backward
    return out


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = Tensor(x.data * mask, (x,))

    def backward(g):
        _accum(x, g * mask)

    out._backward = backward
    return out


def sum_sq_err(pred: Tensor, target: np.ndarray, mask: np.ndarray | None = None) -> Tensor:
    """Sum of (optionally masked) squared errors, as a scalar node."""
    target = np.asarray(target, dtype=pred.data.dtype)
    if pred.data.shape != target.shape:
        raise ValueError(f"target shape {target.shape} != prediction {pred.data.shape}")
    diff = pred.data - target
    if mask is not None:
        diff = diff * mask
    out = Tensor(np.sum(diff * diff), (pred,))

    def backward(g):
        contrib = 2.0 * diff
        if mask is not None:
            contrib = contrib * mask
        _accum(pred, g * contrib)

    out._backward = backward
    return out


def softmax_np(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax along axis 0."""
    z = logits - np.max(logits, axis=0, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=0, keepdims=True)


def cross_entropy(logits: Tensor, classes) -> Tensor:
    """Mean negative log-likelihood of integer class targets.

    ``logits`` is (n_classes,) with a scalar class index, or
    (n_classes, batch) with a length-batch index array.
    """
    p = softmax_np(logits.data)
    if logits.data.ndim == 1:
        idx = int(classes)
        if not 0 <= idx < logits.data.shape[0]:
            raise IndexError(f"class index {idx} out of range")
        z = logits.data - np.max(logits.data)
        loss = np.log(np.sum(np.exp(z))) - z[idx]
        onehot = np.zeros_like(logits.data)
        onehot[idx] = 1.0
        denom = 1.0
    else:
        idx = np.asarray(classes, dtype=np.int64)
        n = logits.data.shape[1]
        if idx.shape != (n,):
            raise ValueError("one class index per batch column required")
        if np.any(idx < 0) or np.any(idx >= logits.data.shape[0]):
            raise IndexError("class index out of range")
        z = logits.data - np.max(logits.data, axis=0, keepdims=True)
        lse = np.log(np.sum(np.exp(z), axis=0))
        loss = float(np.mean(lse - z[idx, np.arange(n)]))
        onehot = np.zeros_like(logits.data)
        onehot[idx, np.arange(n)] = 1.0
        denom = float(n)
    out = Tensor(loss, (logits,))

    def backward(g):
        _accum(logits, g * (p - onehot) / denom)

    out._backward = backward
    return out
