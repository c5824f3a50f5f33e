"""Fully connected fall / no-fall classifier over single pose vectors.

Six linear layers (24-96-192-192-96-24-2) with rectifier activations and a
softmax head. Frames with fewer than 8 detected body keypoints are never
classified; they are prejudged "unknown" instead.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from . import nn
from .autograd import Tensor
from .nn import AdamState, LinearParams
from .skeleton import SkeletonFrame
from .vectorize import (
    MIN_CLASSIFIABLE_KEYPOINTS,
    POSE_DIM,
    ZERO_SUBVECTOR_EPS,
    is_classifiable,
    subvectors,
)

LAYER_SIZES = (24, 96, 192, 192, 96, 24, 2)

CLASS_NO_FALL = 0
CLASS_FALL = 1

DEFAULT_LEARNING_RATE = 0.001


class FallLabel(enum.Enum):
    FALL = "fall"
    NO_FALL = "no_fall"
    UNKNOWN = "unknown"


@dataclass
class ClassifierParams:
    layers: tuple[LinearParams, ...]

    def __post_init__(self) -> None:
        expected = list(zip(LAYER_SIZES[1:], LAYER_SIZES[:-1]))
        got = [(l.out_size, l.in_size) for l in self.layers]
        if got != expected:
            raise ValueError(f"classifier layer shapes must be {expected}, got {got}")

    def arrays(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for i, layer in enumerate(self.layers):
            out[f"layer{i}.W"] = layer.W
            out[f"layer{i}.b"] = layer.b
        return out


@dataclass(frozen=True)
class LabeledPose:
    """One training sample: a pose vector with its frame-level label."""

    vector: np.ndarray
    label: FallLabel
    source_id: str = ""
    frame_index: int = 1
    detected_body_count: int = 13

    def __post_init__(self) -> None:
        if self.label == FallLabel.UNKNOWN:
            raise ValueError("training samples carry fall / no_fall labels only")


def init_classifier(seed: int) -> ClassifierParams:
    rng = np.random.default_rng(seed)
    layers = tuple(
        nn.init_linear(rng, out_size, in_size)
        for in_size, out_size in zip(LAYER_SIZES[:-1], LAYER_SIZES[1:])
    )
    return ClassifierParams(layers=layers)


def _forward_t(tensors: dict[str, Tensor], x: Tensor) -> Tensor:
    n_layers = len(LAYER_SIZES) - 1
    for i in range(n_layers):
        p = {"W": tensors[f"layer{i}.W"], "b": tensors[f"layer{i}.b"]}
        x = nn.linear_forward_t(p, x)
        if i < n_layers - 1:
            x = ag.relu(x)
    return x


def logits(params: ClassifierParams, vector: np.ndarray) -> np.ndarray:
    vector = nn.require_finite("vector", vector)
    if vector.shape[0] != POSE_DIM:
        raise ValueError(f"pose vector must have {POSE_DIM} entries, got {vector.shape}")
    x = vector
    n_layers = len(params.layers)
    for i, layer in enumerate(params.layers):
        x = nn.linear_forward(layer, x)
        if i < n_layers - 1:
            x = np.maximum(x, 0.0)
    return x


def classify(params: ClassifierParams, vector: np.ndarray) -> tuple[FallLabel, np.ndarray]:
    """Label one pose vector; ties go to no-fall.

    Returns the label and the (p_no_fall, p_fall) softmax probabilities.
    """
    z = logits(params, vector)
    probs = ag.softmax_np(z)
    label = FallLabel.FALL if probs[CLASS_FALL] > probs[CLASS_NO_FALL] else FallLabel.NO_FALL
    return label, probs


def prejudge_or_classify(params: ClassifierParams, frame: SkeletonFrame,
                         vector: np.ndarray) -> FallLabel:
    """Classify, unless the source frame has too few detected body keypoints."""
    if not is_classifiable(frame):
        return FallLabel.UNKNOWN
    label, _ = classify(params, vector)
    return label


def implied_detected_count(vector: np.ndarray) -> int:
    """Body keypoints implied present by the nonzero sub-vectors.

    Forecast vectors carry no detection flags, so the prejudging rule reads
    their structure instead: each sub-vector with nonzero direction vouches
    for both of its endpoints.
    """
    from .skeleton import coco_topology

    sub = subvectors(np.asarray(vector, dtype=np.float64))
    norms = np.linalg.norm(sub, axis=1)
    present: set[int] = set()
    for p, (l, r) in enumerate(coco_topology().connections):
        if norms[p] >= ZERO_SUBVECTOR_EPS:
            present.add(l)
            present.add(r)
    return len(present)


def prejudge_or_classify_vector(params: ClassifierParams,
                                vector: np.ndarray) -> tuple[FallLabel, np.ndarray | None]:
    """Prejudging rule for vectors without a source frame (forecast path)."""
    if implied_detected_count(vector) < MIN_CLASSIFIABLE_KEYPOINTS:
        return FallLabel.UNKNOWN, None
    label, probs = classify(params, vector)
    return label, probs


def train_classifier(data, epochs: int, batch_size: int = 64, seed: int = 0,
                     lr: float = DEFAULT_LEARNING_RATE,
                     ) -> tuple[ClassifierParams, list[float]]:
    """Fit by mean cross-entropy with Adam; deterministic for a fixed seed.

    Samples whose source frame had fewer than 8 detected body keypoints are
    dropped before training. Needs both classes present.
    """
    usable = [s for s in data if s.detected_body_count >= MIN_CLASSIFIABLE_KEYPOINTS]
    if not usable:
        raise ValueError("no trainable samples (all empty or below the keypoint minimum)")
    x = np.stack([np.asarray(s.vector, dtype=np.float64) for s in usable])  # (N, 24)
    y = np.array([CLASS_FALL if s.label == FallLabel.FALL else CLASS_NO_FALL
                  for s in usable], dtype=np.int64)
    if len(set(y.tolist())) < 2:
        raise ValueError("training data must contain both classes")

    params = init_classifier(seed)
    arrays = params.arrays()
    adam = AdamState.init(arrays, lr=lr)
    rng = np.random.default_rng(seed + 1)
    n = x.shape[0]
    curve: list[float] = []

    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_sum = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            tensors = {name: Tensor(arr) for name, arr in arrays.items()}
            batch = Tensor(np.ascontiguousarray(x[idx].T))   # (24, b)
            out = _forward_t(tensors, batch)
            loss = ag.cross_entropy(out, y[idx])
            loss.backward()
            grads = {name: (t.grad if t.grad is not None else np.zeros_like(t.data))
                     for name, t in tensors.items()}
            nn.clip_grad_norm(grads)
            nn.adam_update(arrays, grads, adam)
            epoch_sum += loss.item() * len(idx)
        curve.append(epoch_sum / n)
    return params, curve


@dataclass(frozen=True)
class EvalMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    unknown_rate: float
    tp: int
    fp: int
    fn: int
    tn: int
    n_unknown: int

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy, "precision": self.precision,
            "recall": self.recall, "f1": self.f1, "unknown_rate": self.unknown_rate,
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
            "n_unknown": self.n_unknown,
        }


def evaluate(preds, truth) -> EvalMetrics:
    """Confusion metrics with fall as the positive class.

    Unknown predictions count as no-fall in the matrix and are tallied
    separately in ``unknown_rate``.
    """
    if len(preds) != len(truth):
        raise ValueError("predictions and truth must have equal length")
    if len(preds) == 0:
        raise ValueError("evaluate needs at least one pair")
    tp = fp = fn = tn = unknown = 0
    for p, t in zip(preds, truth):
        if t == FallLabel.UNKNOWN:
            raise ValueError("truth labels must be fall / no_fall")
        if p == FallLabel.UNKNOWN:
            unknown += 1
            p = FallLabel.NO_FALL
        if t == FallLabel.FALL:
            if p == FallLabel.FALL:
                tp += 1
            else:
                fn += 1
        else:
            if p == FallLabel.FALL:
                fp += 1
            else:
                tn += 1
    total = tp + fp + fn + tn
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalMetrics(
        accuracy=(tp + tn) / total,
        precision=precision,
        recall=recall,
        f1=f1,
        unknown_rate=unknown / total,
        tp=tp, fp=fp, fn=fn, tn=tn, n_unknown=unknown,
    )


# ---------------------------------------------------------------------------
# Model files.


def save_classifier(path, params: ClassifierParams, seed: int,
                    lr: float = DEFAULT_LEARNING_RATE, principle: str = "p3") -> None:
    hyper = {"layer_sizes": list(LAYER_SIZES), "lr": lr, "principle": principle}
    nn.save_model(path, "classifier", hyper, params.arrays(), seed)


def load_classifier(path) -> tuple[ClassifierParams, int]:
    doc = nn.load_model(path)
    if doc["kind"] != "classifier":
        raise ValueError(f"{path} is not a classifier model file")
    w = doc["weights"]
    n_layers = len(LAYER_SIZES) - 1
    layers = tuple(
        LinearParams(W=w[f"layer{i}.W"], b=w[f"layer{i}.b"]) for i in range(n_layers)
    )
    return ClassifierParams(layers=layers), doc["seed"]
