"""From-scratch dense network for the feature-aggregation head.

Architecture: input -> [hidden dense + ReLU + inverted dropout]* -> dense ->
sigmoid (binary) or softmax (multiclass).  Training uses per-example
cost-sensitive cross-entropy, Adam with the published defaults, and early
stopping on validation macro F1 (the best snapshot is returned, never the
last).  All arithmetic is 64-bit and deterministic given the seed.

Checkpoint format "OFSMLP01", little-endian:

    magic         8 bytes ASCII "OFSMLP01"
    n_layers      u32  (number of affine layers, L)
    dims          (L+1) x u32  (input, hidden..., output widths)
    activations   L x u8  (0=relu, 1=sigmoid, 2=softmax)
    dropout_rate  f64
    layers        L x [W out*in f64 row-major][b out f64]
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import metrics
from .errors import BadMagic, ConfigError, DimensionMismatch, NonFiniteLoss, TruncatedFile
from .features import AlignedFeatures

MAGIC = b"OFSMLP01"
_ACT_RELU, _ACT_SIGMOID, _ACT_SOFTMAX = 0, 1, 2
_CLIP = 1e-7


@dataclass(frozen=True)
class MlpArchitecture:
    input_dim: int
    output_dim: int
    hidden: tuple[int, ...] = (256, 128)
    dropout_rate: float = 0.1

    def __post_init__(self):
        dims = (self.input_dim, *self.hidden, self.output_dim)
        if any(d <= 0 for d in dims):
            raise ConfigError(f"all layer dims must be positive: {dims}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1): {self.dropout_rate}")
        object.__setattr__(self, "hidden", tuple(self.hidden))

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.output_dim)

    @property
    def binary(self) -> bool:
        return self.output_dim == 1

    @property
    def n_classes(self) -> int:
        return 2 if self.binary else self.output_dim


@dataclass
class MlpParams:
    weights: list[np.ndarray]  # per layer, shape (out, in)
    biases: list[np.ndarray]  # per layer, shape (out,)

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class AdamState:
    step: int
    m_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_weights: list[np.ndarray]
    v_biases: list[np.ndarray]
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 50
    batch_size: int = 32
    patience: int = 3
    seed: int = 0
    decision_threshold: float = 0.5

    def __post_init__(self):
        if self.max_epochs <= 0 or self.batch_size <= 0 or self.patience <= 0:
            raise ConfigError("max_epochs, batch_size, and patience must be positive")
        if not 0.0 < self.decision_threshold < 1.0:
            raise ConfigError(f"decision_threshold must be in (0, 1): {self.decision_threshold}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_f1: float


@dataclass
class TrainResult:
    params: MlpParams
    history: list[EpochRecord]
    best_epoch: int
    best_f1: float


def init_params(arch: MlpArchitecture, seed: int) -> MlpParams:
    """Glorot-uniform weights, zero biases, deterministic by seed."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    dims = arch.layer_dims
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(
    params: MlpParams,
    arch: MlpArchitecture,
    x: np.ndarray,
    train: bool = False,
    rng: np.random.Generator | None = None,
):
    """Run the network; returns (output, cache) with cache kept for backward.

    Accepts a single vector or a (n, input_dim) batch.  TRAIN mode applies
    inverted dropout after each hidden ReLU (kept units scaled by
    1/(1-rate)); EVAL mode is the identity, no rescaling needed.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.shape[1] != arch.input_dim:
        raise DimensionMismatch(
            f"input width {batch.shape[1]} != architecture input_dim {arch.input_dim}"
        )
    if train and arch.dropout_rate > 0.0 and rng is None:
        raise ConfigError("TRAIN-mode forward with dropout requires an rng")

    inputs = []  # layer inputs, post-dropout
    pre_acts = []  # affine outputs z
    scales = []  # dropout scale matrices for hidden layers
    a = batch
    n_hidden = len(arch.hidden)
    for layer in range(n_hidden):
        inputs.append(a)
        z = a @ params.weights[layer].T + params.biases[layer]
        pre_acts.append(z)
        a = np.maximum(z, 0.0)
        if train and arch.dropout_rate > 0.0:
            keep = rng.random(a.shape) >= arch.dropout_rate
            scale = keep / (1.0 - arch.dropout_rate)
        else:
            scale = np.ones_like(a)
        scales.append(scale)
        a = a * scale
    inputs.append(a)
    z = a @ params.weights[n_hidden].T + params.biases[n_hidden]
    pre_acts.append(z)
    output = _sigmoid(z) if arch.binary else _softmax(z)

    cache = {
        "inputs": inputs,
        "pre_acts": pre_acts,
        "scales": scales,
        "output": output,
        "single": single,
    }
    out = output[0] if single else output
    if arch.binary:
        out = out[..., 0]
    return out, cache


def weighted_loss(output, target: int, weight: float) -> float:
    """Cost-weighted cross-entropy for one example.

    Binary: output is the sigmoid probability of the positive class and
    target is 0/1.  Categorical: output is the softmax vector and target a
    class index.  Probabilities are clamped to [1e-7, 1 - 1e-7].
    """
    out = np.asarray(output, dtype=np.float64)
    if out.ndim == 0:
        p = float(np.clip(out, _CLIP, 1.0 - _CLIP))
        y = int(target)
        base = -(y * np.log(p) + (1 - y) * np.log(1.0 - p))
    else:
        p = float(np.clip(out[int(target)], _CLIP, 1.0 - _CLIP))
        base = -np.log(p)
    return weight * base


def _batch_losses(output: np.ndarray, targets: np.ndarray, binary: bool) -> np.ndarray:
    if binary:
        p = np.clip(output[:, 0], _CLIP, 1.0 - _CLIP)
        y = targets.astype(np.float64)
        return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    p = np.clip(output[np.arange(len(targets)), targets], _CLIP, 1.0 - _CLIP)
    return -np.log(p)


def backward(cache, params: MlpParams, arch: MlpArchitecture, targets, weights):
    """Exact gradient of the summed weighted loss for the cached batch.

    For a single cached example pass a scalar target/weight; for a batch,
    arrays.  Returns (weight_grads, bias_grads) shaped like the params.
    """
    output = cache["output"]
    n = output.shape[0]
    targets = np.atleast_1d(np.asarray(targets))
    w = np.atleast_1d(np.asarray(weights, dtype=np.float64))
    if len(targets) != n or len(w) != n:
        raise DimensionMismatch(f"cache holds {n} example(s), got {len(targets)} target(s)")

    if arch.binary:
        delta = (output[:, 0] - targets.astype(np.float64))[:, None] * w[:, None]
    else:
        onehot = np.zeros_like(output)
        onehot[np.arange(n), targets] = 1.0
        delta = (output - onehot) * w[:, None]

    weight_grads = [np.empty_like(wm) for wm in params.weights]
    bias_grads = [np.empty_like(b) for b in params.biases]
    n_hidden = len(arch.hidden)
    for layer in range(n_hidden, -1, -1):
        weight_grads[layer] = delta.T @ cache["inputs"][layer]
        bias_grads[layer] = delta.sum(axis=0)
        if layer > 0:
            upstream = delta @ params.weights[layer]
            relu_grad = (cache["pre_acts"][layer - 1] > 0.0).astype(np.float64)
            delta = upstream * cache["scales"][layer - 1] * relu_grad
    return weight_grads, bias_grads


def init_adam(params: MlpParams, learning_rate: float = 1e-3) -> AdamState:
    return AdamState(
        step=0,
        m_weights=[np.zeros_like(w) for w in params.weights],
        m_biases=[np.zeros_like(b) for b in params.biases],
        v_weights=[np.zeros_like(w) for w in params.weights],
        v_biases=[np.zeros_like(b) for b in params.biases],
        learning_rate=learning_rate,
    )


def adam_step(params: MlpParams, grads, state: AdamState) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update; functional, inputs untouched."""
    weight_grads, bias_grads = grads
    t = state.step + 1
    b1, b2, eps, lr = state.beta1, state.beta2, state.epsilon, state.learning_rate
    new_params = params.copy()
    new_state = AdamState(
        step=t,
        m_weights=[], m_biases=[], v_weights=[], v_biases=[],
        learning_rate=lr, beta1=b1, beta2=b2, epsilon=eps,
    )
    for kind, grad_list in (("weights", weight_grads), ("biases", bias_grads)):
        ms = getattr(state, f"m_{kind}")
        vs = getattr(state, f"v_{kind}")
        values = getattr(new_params, kind)
        for i, g in enumerate(grad_list):
            m = b1 * ms[i] + (1 - b1) * g
            v = b2 * vs[i] + (1 - b2) * g * g
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            values[i] = values[i] - lr * m_hat / (np.sqrt(v_hat) + eps)
            getattr(new_state, f"m_{kind}").append(m)
            getattr(new_state, f"v_{kind}").append(v)
    return new_params, new_state


class EarlyStopper:
    """Best-so-far tracker with a patience budget.

    update() returns True when the score strictly improves; should_stop
    flips after `patience` consecutive non-improving updates.
    """

    def __init__(self, patience: int):
        if patience <= 0:
            raise ConfigError(f"patience must be positive: {patience}")
        self.patience = patience
        self.best = float("-inf")
        self.best_index = -1
        self.stale = 0
        self._count = 0

    def update(self, score: float) -> bool:
        index = self._count
        self._count += 1
        if score > self.best:
            self.best = score
            self.best_index = index
            self.stale = 0
            return True
        self.stale += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.stale >= self.patience


def _predict_indices(output: np.ndarray, binary: bool, threshold: float) -> np.ndarray:
    if binary:
        return (output >= threshold).astype(np.int64)
    return np.argmax(output, axis=1)


def _macro_f1_indices(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> float:
    pairs_pred = list(enumerate(y_pred.tolist()))
    pairs_gold = list(enumerate(y_true.tolist()))
    return metrics.evaluate(pairs_pred, pairs_gold, list(range(n_classes))).macro_f1


def train(
    arch: MlpArchitecture,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    class_weight: Sequence[float],
    config: TrainConfig,
    val_scorer: Callable[[MlpParams], float] | None = None,
) -> TrainResult:
    """Weighted mini-batch training with early stopping on validation F1.

    Batch loss is sum(w_i * loss_i) / sum(w_i), which keeps gradient
    magnitude stable across batches with skewed class mixes.  Returns the
    snapshot with the best validation score, never the final params.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    x_val = np.asarray(x_val, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.int64)
    if len(x_train) == 0 or len(x_val) == 0:
        raise ConfigError("train and validation sets must be nonempty")
    class_weight = np.asarray(class_weight, dtype=np.float64)
    if len(class_weight) != arch.n_classes:
        raise DimensionMismatch(
            f"{len(class_weight)} class weights for {arch.n_classes} classes"
        )

    rng = np.random.default_rng(config.seed)
    params = init_params(arch, config.seed)
    state = init_adam(params)

    if val_scorer is None:
        def val_scorer(p: MlpParams) -> float:
            out, _ = forward(p, arch, x_val)
            pred = _predict_indices(
                np.atleast_1d(out) if arch.binary else out,
                arch.binary,
                config.decision_threshold,
            )
            return _macro_f1_indices(y_val, pred, arch.n_classes)

    stopper = EarlyStopper(config.patience)
    best_params = params.copy()
    history: list[EpochRecord] = []
    n = len(x_train)
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        weight_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            wb = class_weight[yb]
            _, cache = forward(params, arch, xb, train=True, rng=rng)
            losses = _batch_losses(cache["output"], yb, arch.binary)
            batch_weight = wb.sum()
            batch_loss = float((wb * losses).sum() / batch_weight)
            if not np.isfinite(batch_loss):
                raise NonFiniteLoss(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}"
                )
            grads = backward(cache, params, arch, yb, wb)
            grads = (
                [g / batch_weight for g in grads[0]],
                [g / batch_weight for g in grads[1]],
            )
            params, state = adam_step(params, grads, state)
            loss_sum += (wb * losses).sum()
            weight_sum += batch_weight
        val_f1 = val_scorer(params)
        history.append(EpochRecord(epoch=epoch, train_loss=loss_sum / weight_sum, val_f1=val_f1))
        if stopper.update(val_f1):
            best_params = params.copy()
        if stopper.should_stop:
            break
    return TrainResult(
        params=best_params,
        history=history,
        best_epoch=stopper.best_index + 1,
        best_f1=stopper.best,
    )


def predict(
    params: MlpParams,
    arch: MlpArchitecture,
    features: AlignedFeatures,
    classes: Sequence[str],
    threshold: float = 0.5,
) -> list[tuple[int, str, np.ndarray]]:
    """EVAL-mode predictions: (id, label, probability vector) per row.

    Binary nets report (1-p, p); the positive class is classes[1] and wins
    when p >= threshold.  Multiclass uses argmax with lowest-index ties.
    """
    if features.dim_total != arch.input_dim:
        raise DimensionMismatch(
            f"feature width {features.dim_total} != architecture input_dim {arch.input_dim}"
        )
    if len(classes) != arch.n_classes:
        raise DimensionMismatch(f"{len(classes)} class names for {arch.n_classes} classes")
    out, _ = forward(params, arch, features.matrix)
    results = []
    if arch.binary:
        p = np.atleast_1d(out)
        probs = np.stack([1.0 - p, p], axis=1)
        picks = (p >= threshold).astype(np.int64)
    else:
        probs = np.atleast_2d(out)
        picks = np.argmax(probs, axis=1)
    for row, example_id in enumerate(features.ids):
        results.append((example_id, classes[int(picks[row])], probs[row]))
    return results


def write_checkpoint(fh, params: MlpParams, arch: MlpArchitecture) -> None:
    """Write the OFSMLP01 blob to an open binary file object."""
    dims = arch.layer_dims
    n_layers = len(params.weights)
    acts = [_ACT_RELU] * len(arch.hidden)
    acts.append(_ACT_SIGMOID if arch.binary else _ACT_SOFTMAX)
    fh.write(MAGIC)
    fh.write(struct.pack("<I", n_layers))
    fh.write(struct.pack(f"<{n_layers + 1}I", *dims))
    fh.write(struct.pack(f"{n_layers}B", *acts))
    fh.write(struct.pack("<d", arch.dropout_rate))
    for w, b in zip(params.weights, params.biases):
        fh.write(w.astype("<f8", copy=False).tobytes())
        fh.write(b.astype("<f8", copy=False).tobytes())


def read_checkpoint(fh) -> tuple[MlpParams, MlpArchitecture]:
    """Read an OFSMLP01 blob from an open binary file object."""
    magic = fh.read(8)
    if magic != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, got {magic!r}")
    raw = fh.read(4)
    if len(raw) != 4:
        raise TruncatedFile("missing layer count")
    (n_layers,) = struct.unpack("<I", raw)
    raw = fh.read(4 * (n_layers + 1))
    if len(raw) != 4 * (n_layers + 1):
        raise TruncatedFile("missing dims")
    dims = struct.unpack(f"<{n_layers + 1}I", raw)
    raw = fh.read(n_layers)
    if len(raw) != n_layers:
        raise TruncatedFile("missing activation codes")
    raw = fh.read(8)
    if len(raw) != 8:
        raise TruncatedFile("missing dropout rate")
    (dropout,) = struct.unpack("<d", raw)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        wb = fh.read(8 * fan_out * fan_in)
        bb = fh.read(8 * fan_out)
        if len(wb) != 8 * fan_out * fan_in or len(bb) != 8 * fan_out:
            raise TruncatedFile("truncated layer data")
        weights.append(np.frombuffer(wb, dtype="<f8").reshape(fan_out, fan_in).copy())
        biases.append(np.frombuffer(bb, dtype="<f8").copy())
    arch = MlpArchitecture(
        input_dim=dims[0], output_dim=dims[-1], hidden=tuple(dims[1:-1]), dropout_rate=dropout
    )
    return MlpParams(weights, biases), arch


def save_checkpoint(path, params: MlpParams, arch: MlpArchitecture) -> None:
    with open(path, "wb") as fh:
        write_checkpoint(fh, params, arch)


def load_checkpoint(path) -> tuple[MlpParams, MlpArchitecture]:
    with open(path, "rb") as fh:
        return read_checkpoint(fh)
