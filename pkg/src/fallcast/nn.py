"""Minimal neural-network engine: LSTM cell, linear maps, losses, Adam.

Parameters live in plain float64 numpy arrays inside small dataclasses.
Training wraps them into :class:`~fallcast.autograd.Tensor` leaves, runs a
taped forward pass, and reads gradients back after ``backward()``. A central
finite-difference checker (`grad_check`) is the reference for every gradient
in the project.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autograd as ag
from .autograd import Tensor

MODEL_FORMAT_VERSION = 1

# Uniform init half-width is 1/sqrt(fan_in); the forget gate bias starts at
# this value so early training does not wipe the cell state.
FORGET_GATE_BIAS_INIT = 1.0
# Global gradient-norm ceiling applied during training.
GRAD_CLIP_NORM = 5.0


def require_finite(name: str, arr) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass
class LinearParams:
    """y = W x + b with W (out, in) and b (out,)."""

    W: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        self.W = require_finite("W", self.W)
        self.b = require_finite("b", self.b)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ValueError(f"inconsistent linear shapes: W {self.W.shape}, b {self.b.shape}")

    @property
    def out_size(self) -> int:
        return self.W.shape[0]

    @property
    def in_size(self) -> int:
        return self.W.shape[1]


@dataclass
class LstmCellParams:
    """Gate weights over the concatenated [h_prev, x] vector.

    Each W_* is (hidden, hidden + input); each b_* is (hidden,).
    """

    W_i: np.ndarray
    W_f: np.ndarray
    W_o: np.ndarray
    W_c: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_c: np.ndarray

    def __post_init__(self) -> None:
        for name in ("W_i", "W_f", "W_o", "W_c", "b_i", "b_f", "b_o", "b_c"):
            setattr(self, name, require_finite(name, getattr(self, name)))
        shape = self.W_i.shape
        hidden = shape[0]
        if shape[1] <= hidden:
            raise ValueError("gate matrices must be (hidden, hidden + input)")
        for name in ("W_f", "W_o", "W_c"):
            if getattr(self, name).shape != shape:
                raise ValueError("all gate matrices must share one shape")
        for name in ("b_i", "b_f", "b_o", "b_c"):
            if getattr(self, name).shape != (hidden,):
                raise ValueError("gate biases must be (hidden,)")

    @property
    def hidden_size(self) -> int:
        return self.W_i.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_i.shape[1] - self.W_i.shape[0]


@dataclass
class LstmState:
    """Hidden and cell vectors; (hidden,) or (hidden, batch)."""

    h: np.ndarray
    c: np.ndarray

    def __post_init__(self) -> None:
        self.h = require_finite("h", self.h)
        self.c = require_finite("c", self.c)
        if self.h.shape != self.c.shape:
            raise ValueError("h and c must have equal shapes")


def zero_state(hidden_size: int, batch: int | None = None) -> LstmState:
    shape = (hidden_size,) if batch is None else (hidden_size, batch)
    return LstmState(np.zeros(shape), np.zeros(shape))


def init_linear(rng: np.random.Generator, out_size: int, in_size: int) -> LinearParams:
    bound = 1.0 / np.sqrt(in_size)
    W = rng.uniform(-bound, bound, size=(out_size, in_size))
    return LinearParams(W=W, b=np.zeros(out_size))


def init_lstm_cell(rng: np.random.Generator, hidden_size: int, input_size: int) -> LstmCellParams:
    fan_in = hidden_size + input_size
    bound = 1.0 / np.sqrt(fan_in)

    def w():
        return rng.uniform(-bound, bound, size=(hidden_size, fan_in))

    return LstmCellParams(
        W_i=w(), W_f=w(), W_o=w(), W_c=w(),
        b_i=np.zeros(hidden_size),
        b_f=np.full(hidden_size, FORGET_GATE_BIAS_INIT),
        b_o=np.zeros(hidden_size),
        b_c=np.zeros(hidden_size),
    )


# ---------------------------------------------------------------------------
# Taped forward passes (training path). The *_t variants take/return Tensors.


def lstm_step_t(p: dict[str, Tensor], x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
    """One LSTM cell update on the tape.

    ``p`` maps the eight parameter names of LstmCellParams to leaf tensors.
    """
    hx = ag.concat(h, x)
    i = ag.sigmoid(ag.bias_add(ag.matmul(p["W_i"], hx), p["b_i"]))
    f = ag.sigmoid(ag.bias_add(ag.matmul(p["W_f"], hx), p["b_f"]))
    o = ag.sigmoid(ag.bias_add(ag.matmul(p["W_o"], hx), p["b_o"]))
    c_tilde = ag.tanh(ag.bias_add(ag.matmul(p["W_c"], hx), p["b_c"]))
    c_new = ag.add(ag.mul(f, c), ag.mul(i, c_tilde))
    h_new = ag.mul(o, ag.tanh(c_new))
    return h_new, c_new


def linear_forward_t(p: dict[str, Tensor], x: Tensor) -> Tensor:
    return ag.bias_add(ag.matmul(p["W"], x), p["b"])


def lstm_tensors(params: LstmCellParams) -> dict[str, Tensor]:
    return {name: Tensor(getattr(params, name))
            for name in ("W_i", "W_f", "W_o", "W_c", "b_i", "b_f", "b_o", "b_c")}


def linear_tensors(params: LinearParams) -> dict[str, Tensor]:
    return {"W": Tensor(params.W), "b": Tensor(params.b)}


# ---------------------------------------------------------------------------
# Plain-array surface.


def lstm_step(params: LstmCellParams, x_t: np.ndarray, prev: LstmState) -> LstmState:
    """One LSTM cell update: gates from sigmoid, candidate from tanh."""
    x_t = require_finite("x_t", x_t)
    if x_t.shape[0] != params.input_size:
        raise ValueError(f"input size {x_t.shape[0]} != expected {params.input_size}")
    if prev.h.shape[0] != params.hidden_size:
        raise ValueError(f"state size {prev.h.shape[0]} != hidden {params.hidden_size}")
    if x_t.ndim != prev.h.ndim or x_t.shape[1:] != prev.h.shape[1:]:
        raise ValueError("input and state batch shapes must agree")
    h, c = lstm_step_t(lstm_tensors(params), Tensor(x_t), Tensor(prev.h), Tensor(prev.c))
    return LstmState(h.data, c.data)


def linear_forward(params: LinearParams, x: np.ndarray) -> np.ndarray:
    x = require_finite("x", x)
    if x.shape[0] != params.in_size:
        raise ValueError(f"input size {x.shape[0]} != expected {params.in_size}")
    if x.ndim == 1:
        return params.W @ x + params.b
    return params.W @ x + params.b[:, None]


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient with respect to ``pred``."""
    pred = require_finite("pred", pred)
    target = require_finite("target", target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ValueError("mse_loss needs at least one element")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    grad = 2.0 * diff / diff.size
    return loss, grad


def cross_entropy_loss(logits: np.ndarray, class_index: int) -> tuple[float, np.ndarray]:
    """Negative log softmax probability of the true class, with gradient."""
    logits = require_finite("logits", logits)
    if logits.ndim != 1 or logits.shape[0] < 2:
        raise ValueError("logits must be a vector of at least two entries")
    if not 0 <= class_index < logits.shape[0]:
        raise IndexError(f"class index {class_index} out of range")
    z = logits - np.max(logits)
    lse = np.log(np.sum(np.exp(z)))
    loss = float(lse - z[class_index])
    grad = np.exp(z - lse)
    grad[class_index] -= 1.0
    return loss, grad


def backward(loss: Tensor) -> None:
    """Reverse-mode pass from a scalar loss node recorded on the tape."""
    if not isinstance(loss, Tensor):
        raise ValueError("backward() expects the Tensor returned by a forward pass")
    loss.backward()


# ---------------------------------------------------------------------------
# Adam.


@dataclass
class AdamState:
    """Moment buffers and hyperparameters, keyed like the parameter dict."""

    step: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def init(cls, params: dict[str, np.ndarray], lr: float = 0.001,
             beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8) -> "AdamState":
        return cls(
            step=0,
            m={k: np.zeros_like(v) for k, v in params.items()},
            v={k: np.zeros_like(v) for k, v in params.items()},
            lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon,
        )


def adam_update(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
                state: AdamState) -> tuple[dict[str, np.ndarray], AdamState]:
    """One Adam step with bias correction; updates params in place."""
    state.step += 1
    t = state.step
    for key, p in params.items():
        g = require_finite(f"grad[{key}]", grads[key])
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {key}")
        m = state.m[key]
        v = state.v[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params, state


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float = GRAD_CLIP_NORM) -> float:
    """Scale all gradients so their joint L2 norm is at most ``max_norm``."""
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g * g))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for g in grads.values():
            g *= factor
    return norm


# ---------------------------------------------------------------------------
# Gradient checking.


def grad_check(loss_fn, params: dict[str, np.ndarray], step: float = 1e-5,
               recheck_rel: float = 1e-6) -> float:
    """Max relative error between taped gradients and central differences.

    ``loss_fn`` maps a dict of leaf Tensors (same keys as ``params``) to a
    scalar Tensor and must be deterministic. Differences run in float64
    first; coordinates whose relative error exceeds ``recheck_rel`` there
    (tiny gradients drowned by float64 difference roundoff) are re-measured
    with the loss evaluated in long double.
    """
    tensors = {k: Tensor(v.copy()) for k, v in params.items()}
    loss = loss_fn(tensors)
    loss.backward()
    analytic = {
        k: (t.grad if t.grad is not None else np.zeros_like(t.data))
        for k, t in tensors.items()
    }

    work = {k: v.copy() for k, v in params.items()}
    max_rel = 0.0
    suspicious: list[tuple[str, int, float]] = []
    for key, arr in work.items():
        flat = arr.reshape(-1)
        a_flat = analytic[key].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn({k: Tensor(v) for k, v in work.items()}).item()
            flat[i] = orig - step
            down = loss_fn({k: Tensor(v) for k, v in work.items()}).item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * step)
            a = float(a_flat[i])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if rel > recheck_rel:
                suspicious.append((key, i, a))
            else:
                max_rel = max(max_rel, rel)

    if suspicious:
        work_ld = {k: v.astype(np.longdouble) for k, v in params.items()}
        h = np.longdouble(step)
        for key, i, a in suspicious:
            flat = work_ld[key].reshape(-1)
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn({k: Tensor(v) for k, v in work_ld.items()}).data
            flat[i] = orig - h
            down = loss_fn({k: Tensor(v) for k, v in work_ld.items()}).data
            flat[i] = orig
            numeric = float((up - down) / (2.0 * h))
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            max_rel = max(max_rel, rel)
    return max_rel


# ---------------------------------------------------------------------------
# Serialization. Weight arrays are stored as JSON float lists in declared
# order; reload reproduces bit-identical values.


def save_model(path, kind: str, hyperparams: dict, weights: dict[str, np.ndarray],
               seed: int) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": kind,
        "seed": seed,
        "hyperparams": hyperparams,
        "weights": {
            name: {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
            for name, arr in weights.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version in {Path(path).name}")
    weights = {}
    for name, entry in doc["weights"].items():
        arr = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        weights[name] = require_finite(name, arr)
    doc["weights"] = weights
    return doc
