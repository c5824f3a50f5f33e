"""Seq2seq pose forecaster.

Observed pose vectors are packed ``n_p`` per step (shortening the unroll and
damping drift toward an average pose), encoded by one LSTM layer, and decoded
autoregressively by a second: the decoder starts from the encoder's final
state, takes the last observed package as its first input, and feeds each
projected output back in as the next input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from . import nn
from .autograd import Tensor
from .nn import AdamState, LinearParams, LstmCellParams, LstmState
from .vectorize import POSE_DIM, PoseVectorSequence

DEFAULT_LEARNING_RATE = 0.001
# Early stop when the epoch loss improves by less than this relative amount
# over PLATEAU_WINDOW epochs.
PLATEAU_REL_IMPROVEMENT = 1e-4
PLATEAU_WINDOW = 5


@dataclass(frozen=True)
class PredictorConfig:
    """Observation/forecast window lengths and packing width."""

    t_obs: int = 25
    t_pred: int = 50
    n_p: int = 5
    hidden_size: int = 256

    def __post_init__(self) -> None:
        for name in ("t_obs", "t_pred", "n_p", "hidden_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def package_dim(self) -> int:
        return POSE_DIM * self.n_p

    @property
    def n_obs_packages(self) -> int:
        return math.ceil(self.t_obs / self.n_p)

    @property
    def n_pred_steps(self) -> int:
        return math.ceil(self.t_pred / self.n_p)

    def as_dict(self) -> dict:
        return {"t_obs": self.t_obs, "t_pred": self.t_pred,
                "n_p": self.n_p, "hidden_size": self.hidden_size}


@dataclass
class PackedSequence:
    """Pose vectors concatenated n_p per package, zero-padded at the tail."""

    packages: np.ndarray  # (n_packages, 24 * n_p)
    real_count: int


def _as_vector_array(seq) -> np.ndarray:
    if isinstance(seq, PoseVectorSequence):
        arr = np.asarray(seq.vectors, dtype=np.float64)
    else:
        arr = np.asarray(seq, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != POSE_DIM:
        raise ValueError(f"expected an (n, {POSE_DIM}) vector sequence, got {arr.shape}")
    return arr


def pack(seq, n_p: int) -> PackedSequence:
    """Concatenate every n_p consecutive pose vectors into one package."""
    vectors = _as_vector_array(seq)
    n = vectors.shape[0]
    if n == 0:
        raise ValueError("cannot pack an empty sequence")
    if n_p < 1:
        raise ValueError("n_p must be positive")
    n_packages = math.ceil(n / n_p)
    padded = np.zeros((n_packages * n_p, POSE_DIM), dtype=np.float64)
    padded[:n] = vectors
    return PackedSequence(padded.reshape(n_packages, n_p * POSE_DIM), real_count=n)


def unpack(packed: PackedSequence, n_p: int, expected_count: int) -> np.ndarray:
    """Split packages back into pose vectors, dropping the padded tail."""
    packages = np.asarray(packed.packages, dtype=np.float64)
    capacity = packages.shape[0] * n_p
    if expected_count > capacity:
        raise ValueError(f"expected {expected_count} vectors but capacity is {capacity}")
    return packages.reshape(capacity, POSE_DIM)[:expected_count].copy()


def pad_mask(real_count: int, n_p: int) -> np.ndarray:
    """1.0 where a packed position holds a real vector, 0.0 on the padding."""
    n_packages = math.ceil(real_count / n_p)
    mask = np.zeros((n_packages * n_p, POSE_DIM), dtype=np.float64)
    mask[:real_count] = 1.0
    return mask.reshape(n_packages, n_p * POSE_DIM)


@dataclass
class PredictorParams:
    encoder: LstmCellParams
    decoder: LstmCellParams
    out_proj: LinearParams

    def __post_init__(self) -> None:
        if self.encoder.hidden_size != self.decoder.hidden_size:
            raise ValueError("encoder and decoder must share hidden size")
        if self.encoder.input_size != self.decoder.input_size:
            raise ValueError("encoder and decoder must share input size")
        if self.out_proj.in_size != self.decoder.hidden_size:
            raise ValueError("projection input must match hidden size")
        if self.out_proj.out_size != self.decoder.input_size:
            raise ValueError("projection output must match the package width")

    def arrays(self) -> dict[str, np.ndarray]:
        """Named parameter arrays in fixed declaration order (live views)."""
        out: dict[str, np.ndarray] = {}
        for prefix, cell in (("encoder", self.encoder), ("decoder", self.decoder)):
            for name in ("W_i", "W_f", "W_o", "W_c", "b_i", "b_f", "b_o", "b_c"):
                out[f"{prefix}.{name}"] = getattr(cell, name)
        out["out_proj.W"] = self.out_proj.W
        out["out_proj.b"] = self.out_proj.b
        return out


def init_predictor(config: PredictorConfig, seed: int) -> PredictorParams:
    rng = np.random.default_rng(seed)
    return PredictorParams(
        encoder=nn.init_lstm_cell(rng, config.hidden_size, config.package_dim),
        decoder=nn.init_lstm_cell(rng, config.hidden_size, config.package_dim),
        out_proj=nn.init_linear(rng, config.package_dim, config.hidden_size),
    )


def _wrap(params: PredictorParams) -> dict[str, Tensor]:
    return {name: Tensor(arr) for name, arr in params.arrays().items()}


def _split_tensors(tensors: dict[str, Tensor]):
    enc = {k.split(".", 1)[1]: v for k, v in tensors.items() if k.startswith("encoder.")}
    dec = {k.split(".", 1)[1]: v for k, v in tensors.items() if k.startswith("decoder.")}
    proj = {"W": tensors["out_proj.W"], "b": tensors["out_proj.b"]}
    return enc, dec, proj


def _encode_t(enc: dict[str, Tensor], obs_steps: list[Tensor], hidden: int,
              batch: int | None) -> tuple[Tensor, Tensor]:
    shape = (hidden,) if batch is None else (hidden, batch)
    h = Tensor(np.zeros(shape))
    c = Tensor(np.zeros(shape))
    for x in obs_steps:
        h, c = nn.lstm_step_t(enc, x, h, c)
    return h, c


def _decode_t(dec: dict[str, Tensor], proj: dict[str, Tensor], h: Tensor, c: Tensor,
              first_input: Tensor, steps: int) -> list[Tensor]:
    outputs: list[Tensor] = []
    x = first_input
    for _ in range(steps):
        h, c = nn.lstm_step_t(dec, x, h, c)
        y = nn.linear_forward_t(proj, h)
        outputs.append(y)
        x = y
    return outputs


def forward_seq2seq(tensors: dict[str, Tensor], obs_packages: list[Tensor],
                    steps: int, hidden: int, batch: int | None = None) -> list[Tensor]:
    """Taped encoder/decoder pass; returns the decoder output packages."""
    enc, dec, proj = _split_tensors(tensors)
    h, c = _encode_t(enc, obs_packages, hidden, batch)
    return _decode_t(dec, proj, h, c, obs_packages[-1], steps)


def encode(params: PredictorParams, packed_obs: PackedSequence) -> LstmState:
    """Fold the encoder cell over the observed packages from a zero state."""
    packages = np.asarray(packed_obs.packages, dtype=np.float64)
    if packages.ndim != 2 or packages.shape[1] != params.encoder.input_size:
        raise ValueError(
            f"package width {packages.shape[-1]} != encoder input {params.encoder.input_size}"
        )
    state = nn.zero_state(params.encoder.hidden_size)
    for row in packages:
        state = nn.lstm_step(params.encoder, row, state)
    return state


def decode(params: PredictorParams, init: LstmState, last_obs_package: np.ndarray,
           steps: int) -> np.ndarray:
    """Autoregressive decode: project each hidden state, feed the result back."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = nn.require_finite("last_obs_package", last_obs_package)
    if x.shape[0] != params.decoder.input_size:
        raise ValueError(
            f"package width {x.shape[0]} != decoder input {params.decoder.input_size}"
        )
    state = LstmState(init.h.copy(), init.c.copy())
    outputs = []
    for _ in range(steps):
        state = nn.lstm_step(params.decoder, x, state)
        y = nn.linear_forward(params.out_proj, state.h)
        outputs.append(y)
        x = y
    return np.stack(outputs)


def predict(params: PredictorParams, config: PredictorConfig, obs) -> np.ndarray:
    """Forecast t_pred pose vectors from exactly t_obs observed ones."""
    vectors = _as_vector_array(obs)
    if vectors.shape[0] != config.t_obs:
        raise ValueError(f"expected {config.t_obs} observed frames, got {vectors.shape[0]}")
    packed = pack(vectors, config.n_p)
    state = encode(params, packed)
    outputs = decode(params, state, packed.packages[-1], config.n_pred_steps)
    return unpack(PackedSequence(outputs, config.t_pred), config.n_p, config.t_pred)


def predict_batch(params: PredictorParams, config: PredictorConfig,
                  obs_batch: np.ndarray) -> np.ndarray:
    """Vectorized ``predict`` over a (batch, t_obs, 24) array."""
    obs_batch = np.asarray(obs_batch, dtype=np.float64)
    if obs_batch.ndim != 3 or obs_batch.shape[1] != config.t_obs or obs_batch.shape[2] != POSE_DIM:
        raise ValueError(f"expected (batch, {config.t_obs}, {POSE_DIM}), got {obs_batch.shape}")
    b = obs_batch.shape[0]
    steps = _batch_obs_steps(obs_batch, config)
    tensors = _wrap(params)
    outputs = forward_seq2seq(tensors, steps, config.n_pred_steps, config.hidden_size, b)
    stacked = np.stack([o.data for o in outputs])            # (steps, pkg, b)
    per_item = stacked.transpose(2, 0, 1)                    # (b, steps, pkg)
    return np.stack([
        unpack(PackedSequence(per_item[i], config.t_pred), config.n_p, config.t_pred)
        for i in range(b)
    ])


def _batch_obs_steps(obs_batch: np.ndarray, config: PredictorConfig) -> list[Tensor]:
    """Pack a (batch, t_obs, 24) block into time-major (pkg_dim, batch) tensors."""
    b = obs_batch.shape[0]
    k = config.n_obs_packages
    padded = np.zeros((b, k * config.n_p, POSE_DIM), dtype=np.float64)
    padded[:, :config.t_obs] = obs_batch
    pkgs = padded.reshape(b, k, config.package_dim)
    return [Tensor(np.ascontiguousarray(pkgs[:, j].T)) for j in range(k)]


def make_training_windows(segments, config: PredictorConfig) -> list[tuple[np.ndarray, np.ndarray]]:
    """Every contiguous (t_obs + t_pred)-frame window, split into obs/target."""
    total = config.t_obs + config.t_pred
    out = []
    for seg in segments:
        vectors = _as_vector_array(seg)
        for start in range(0, vectors.shape[0] - total + 1):
            window = vectors[start:start + total]
            out.append((window[:config.t_obs].copy(), window[config.t_obs:].copy()))
    return out


def train_predictor(windows, config: PredictorConfig, epochs: int,
                    batch_size: int = 32, seed: int = 0,
                    lr: float = DEFAULT_LEARNING_RATE,
                    plateau_stop: bool = True,
                    initial: PredictorParams | None = None,
                    ) -> tuple[PredictorParams, list[float]]:
    """Fit the forecaster by MSE on packed targets (padding excluded).

    Decoding stays autoregressive during training. Deterministic for a fixed
    seed. Returns the trained parameters and the per-epoch mean loss.
    """
    if not windows:
        raise ValueError("training needs at least one window")
    params = initial if initial is not None else init_predictor(config, seed)
    rng = np.random.default_rng(seed + 1)

    obs = np.stack([w[0] for w in windows])                  # (N, t_obs, 24)
    tgt = np.stack([w[1] for w in windows])                  # (N, t_pred, 24)
    n = obs.shape[0]

    k_pred = config.n_pred_steps
    tgt_padded = np.zeros((n, k_pred * config.n_p, POSE_DIM), dtype=np.float64)
    tgt_padded[:, :config.t_pred] = tgt
    tgt_pkgs = tgt_padded.reshape(n, k_pred, config.package_dim)
    mask = pad_mask(config.t_pred, config.n_p)               # (k_pred, pkg_dim)
    real_positions = float(config.t_pred * POSE_DIM)

    arrays = params.arrays()
    adam = AdamState.init(arrays, lr=lr)
    curve: list[float] = []

    for epoch in range(epochs):
        order = rng.permutation(n)
        epoch_sq_sum = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            b = len(idx)
            tensors = {name: Tensor(arr) for name, arr in arrays.items()}
            obs_steps = _batch_obs_steps(obs[idx], config)
            outputs = forward_seq2seq(tensors, obs_steps, k_pred, config.hidden_size, b)
            batch_tgts = tgt_pkgs[idx]                       # (b, k_pred, pkg)
            loss = None
            for j, out_j in enumerate(outputs):
                mask_j = np.broadcast_to(mask[j][:, None], (config.package_dim, b))
                term = ag.sum_sq_err(out_j, np.ascontiguousarray(batch_tgts[:, j].T), mask_j)
                loss = term if loss is None else ag.add(loss, term)
            loss = ag.scale(loss, 1.0 / (real_positions * b))
            loss.backward()
            grads = {name: (t.grad if t.grad is not None else np.zeros_like(t.data))
                     for name, t in tensors.items()}
            nn.clip_grad_norm(grads)
            nn.adam_update(arrays, grads, adam)
            epoch_sq_sum += loss.item() * b
        curve.append(epoch_sq_sum / n)
        if plateau_stop and len(curve) > PLATEAU_WINDOW:
            before = curve[-1 - PLATEAU_WINDOW]
            if (before - curve[-1]) / max(abs(before), 1e-12) < PLATEAU_REL_IMPROVEMENT:
                break
    return params, curve


def mcs(ground, pred) -> float:
    """Mean cosine similarity between aligned forecast sequences.

    Per sample: average over frames of the cosine between the 24-number
    truth and prediction; then average over samples. A frame where either
    side has zero norm contributes 0.
    """
    if len(ground) != len(pred):
        raise ValueError("ground and pred must pair up")
    if len(ground) == 0:
        raise ValueError("mcs needs at least one sample")
    per_sample = []
    for g_seq, p_seq in zip(ground, pred):
        g = np.asarray(g_seq, dtype=np.float64)
        p = np.asarray(p_seq, dtype=np.float64)
        if g.shape != p.shape or g.ndim != 2:
            raise ValueError("each pair must hold equally many aligned vectors")
        g_norm = np.linalg.norm(g, axis=1)
        p_norm = np.linalg.norm(p, axis=1)
        dots = np.sum(g * p, axis=1)
        valid = (g_norm > 0.0) & (p_norm > 0.0)
        cos = np.zeros(g.shape[0])
        cos[valid] = dots[valid] / (g_norm[valid] * p_norm[valid])
        per_sample.append(float(np.mean(cos)))
    return float(np.mean(per_sample))


# ---------------------------------------------------------------------------
# Model files.


def save_predictor(path, params: PredictorParams, config: PredictorConfig, seed: int,
                   lr: float = DEFAULT_LEARNING_RATE) -> None:
    hyper = config.as_dict()
    hyper["lr"] = lr
    nn.save_model(path, "predictor", hyper, params.arrays(), seed)


def load_predictor(path) -> tuple[PredictorParams, PredictorConfig, int]:
    doc = nn.load_model(path)
    if doc["kind"] != "predictor":
        raise ValueError(f"{path} is not a predictor model file")
    hyper = doc["hyperparams"]
    config = PredictorConfig(
        t_obs=hyper["t_obs"], t_pred=hyper["t_pred"],
        n_p=hyper["n_p"], hidden_size=hyper["hidden_size"],
    )
    w = doc["weights"]

    def cell(prefix: str) -> LstmCellParams:
        return LstmCellParams(**{name: w[f"{prefix}.{name}"]
                                 for name in ("W_i", "W_f", "W_o", "W_c",
                                              "b_i", "b_f", "b_o", "b_c")})

    params = PredictorParams(
        encoder=cell("encoder"),
        decoder=cell("decoder"),
        out_proj=LinearParams(W=w["out_proj.W"], b=w["out_proj.b"]),
    )
    if params.encoder.input_size != config.package_dim:
        raise ValueError("model weights do not match the stored configuration")
    return params, config, doc["seed"]
