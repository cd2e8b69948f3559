"""Per-node model: an MLP trained with SGD plus the neighbourhood
averaging rule that replaces a node's weights with the dataset-size-weighted
mean of its neighbourhood's weights (own model included).

Model parameters live in one flat float64 vector; a shape descriptor maps
segments onto layers. States are value types: every operation returns a new
state and never mutates its inputs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .datadist import Dataset
from .errors import DataFormatError, ParameterError

_CHECKPOINT_MAGIC = b"DSMC"
_CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    input_dim: int
    hidden_sizes: tuple[int, ...]
    num_classes: int
    activation: str = "relu"

    def __post_init__(self) -> None:
        sizes = (self.input_dim, *self.hidden_sizes, self.num_classes)
        if any(s <= 0 for s in sizes):
            raise ParameterError(f"all layer sizes must be positive, got {sizes}")
        if self.activation != "relu":
            raise ParameterError(f"unsupported activation {self.activation!r}")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_sizes, self.num_classes)

    @property
    def num_layers(self) -> int:
        return len(self.layer_dims) - 1

    def segments(self) -> list[tuple[str, int, int]]:
        """(name, offset, length) for every weight matrix and bias vector."""
        out = []
        offset = 0
        dims = self.layer_dims
        for layer in range(self.num_layers):
            fan_in, fan_out = dims[layer], dims[layer + 1]
            out.append((f"W{layer}", offset, fan_in * fan_out))
            offset += fan_in * fan_out
            out.append((f"b{layer}", offset, fan_out))
            offset += fan_out
        return out

    @property
    def num_params(self) -> int:
        dims = self.layer_dims
        return sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(self.num_layers))


@dataclass
class ModelState:
    spec: ModelSpec
    params: np.ndarray    # flat float64, length spec.num_params
    momentum: np.ndarray  # same shape; reset to zero by aggregation

    def __post_init__(self) -> None:
        if self.params.shape != (self.spec.num_params,):
            raise ParameterError(
                f"parameter vector length {self.params.shape} != {self.spec.num_params}")
        if self.momentum.shape != self.params.shape:
            raise ParameterError("momentum buffer shape differs from parameters")

    def copy(self) -> "ModelState":
        return ModelState(self.spec, self.params.copy(), self.momentum.copy())

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(weight matrix, bias vector) views per layer; weights are fan_in x fan_out."""
        out = []
        offset = 0
        dims = self.spec.layer_dims
        for layer in range(self.spec.num_layers):
            fan_in, fan_out = dims[layer], dims[layer + 1]
            w = self.params[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out)
            offset += fan_in * fan_out
            b = self.params[offset:offset + fan_out]
            offset += fan_out
            out.append((w, b))
        return out


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.5
    batch_size: int = 10
    local_epochs: int = 1

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ParameterError("momentum must be in [0, 1)")
        if self.batch_size < 1 or self.local_epochs < 1:
            raise ParameterError("batch_size and local_epochs must be >= 1")


@dataclass(frozen=True)
class Contribution:
    """One neighbourhood member's model plus its local dataset size."""

    state: ModelState
    num_samples: int

    def __post_init__(self) -> None:
        if self.num_samples < 0:
            raise ParameterError("num_samples must be >= 0")


@dataclass(frozen=True)
class TrainResult:
    state: ModelState
    skipped: bool  # true when the node had no local data


def init_model(spec: ModelSpec, seed: int) -> ModelState:
    """Uniform fan-in-scaled weights (|w| <= 1/sqrt(fan_in)), zero biases,
    zero momentum. Every node starts a run from this same state."""
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    params = np.zeros(spec.num_params, dtype=np.float64)
    offset = 0
    dims = spec.layer_dims
    for layer in range(spec.num_layers):
        fan_in, fan_out = dims[layer], dims[layer + 1]
        bound = 1.0 / np.sqrt(fan_in)
        params[offset:offset + fan_in * fan_out] = rng.uniform(
            -bound, bound, size=fan_in * fan_out)
        offset += fan_in * fan_out + fan_out  # biases stay zero
    return ModelState(spec=spec, params=params, momentum=np.zeros_like(params))


def forward(state: ModelState, x: np.ndarray) -> np.ndarray:
    """Class scores (logits). Accepts one sample (dim,) or a batch (n, dim)."""
    single = x.ndim == 1
    h = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if h.shape[1] != state.spec.input_dim:
        raise ParameterError(
            f"input dim {h.shape[1]} != model input dim {state.spec.input_dim}")
    layers = state.layers()
    for w, b in layers[:-1]:
        h = np.maximum(h @ w + b, 0.0)
    w, b = layers[-1]
    scores = h @ w + b
    return scores[0] if single else scores


def predict(state: ModelState, x: np.ndarray) -> np.ndarray:
    """Argmax class per sample; ties resolve to the lowest class id."""
    scores = np.atleast_2d(forward(state, x))
    return np.argmax(scores, axis=1)


def loss_and_grad(state: ModelState, x: np.ndarray,
                  y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy over the batch and its flat gradient."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    n = x.shape[0]
    layers = state.layers()
    activations = [x]
    h = x
    for w, b in layers[:-1]:
        h = np.maximum(h @ w + b, 0.0)
        activations.append(h)
    w_out, b_out = layers[-1]
    logits = h @ w_out + b_out

    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    loss = float(-np.mean(shifted[np.arange(n), y] - np.log(exp.sum(axis=1))))

    grad = np.zeros_like(state.params)
    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n
    # gradient views share the flat layout used by ModelState.layers()
    views = []
    offset = 0
    dims = state.spec.layer_dims
    for layer in range(state.spec.num_layers):
        fan_in, fan_out = dims[layer], dims[layer + 1]
        gw = grad[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        gb = grad[offset:offset + fan_out]
        offset += fan_out
        views.append((gw, gb))
    for layer in range(state.spec.num_layers - 1, -1, -1):
        gw, gb = views[layer]
        gw += activations[layer].T @ delta
        gb += delta.sum(axis=0)
        if layer > 0:
            w, _ = layers[layer]
            delta = (delta @ w.T) * (activations[layer] > 0.0)
    return loss, grad


def local_train(state: ModelState, x: np.ndarray, y: np.ndarray,
                cfg: TrainConfig, seed: int) -> TrainResult:
    """SGD with momentum over the node's local samples.

    Runs ``local_epochs`` passes; each pass shuffles with a stream derived
    from (seed, epoch) and steps per mini-batch. Nodes without data are
    reported as skipped rather than failed: data-less bridge nodes are a
    normal part of the survivors-only scenario.
    """
    if x.shape[0] == 0:
        return TrainResult(state=state, skipped=True)
    new = state.copy()
    for epoch in range(cfg.local_epochs):
        rng = np.random.default_rng(np.random.SeedSequence([seed, epoch]))
        order = rng.permutation(x.shape[0])
        for start in range(0, order.shape[0], cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            _, grad = loss_and_grad(new, x[batch], y[batch])
            new.momentum *= cfg.momentum
            new.momentum += grad
            new.params -= cfg.learning_rate * new.momentum
    return TrainResult(state=new, skipped=False)


def evaluate(state: ModelState, test: Dataset) -> float:
    """Fraction of correctly classified test samples."""
    if test.count == 0:
        raise ParameterError("evaluate requires a nonempty test set")
    return float(np.mean(predict(state, test.features) == test.labels))


def decavg_aggregate(contributions: Sequence[Contribution]) -> ModelState:
    """Dataset-size-weighted average of the neighbourhood's parameters.

    Weights are s_j / sum(s_k) where s_j is the dataset size for nodes that
    hold data. A data-less node is a relay: its model is itself an average of
    its data-holding neighbours, so it participates with the mean size of the
    data-holding members (falling back to 1 when nobody holds data). Without
    this, a bridge's influence would be ~1/|D| of everyone else's and it
    could never pass knowledge across the gap it spans.

    The momentum buffer is reset to zero. Accumulation is order-canonicalised
    (per-element ascending sort) so any permutation of the inputs yields a
    bit-identical result, and the output is clipped into the elementwise
    input envelope so convexity holds exactly.
    """
    if not contributions:
        raise ParameterError("aggregation needs at least the node's own model")
    spec = contributions[0].state.spec
    for c in contributions:
        if c.state.spec != spec:
            raise ParameterError("aggregation inputs disagree on model shape")
    sizes = np.array([c.num_samples for c in contributions], dtype=np.float64)
    positive = sizes[sizes > 0]
    relay_size = positive.mean() if positive.size else 1.0
    sizes = np.where(sizes > 0, sizes, relay_size)
    total = sizes.sum()
    if total <= 0:
        raise ParameterError("degenerate aggregation weights: all effective sizes zero")
    weights = sizes / total
    stacked = np.stack([c.state.params for c in contributions], axis=0)
    lo = stacked.min(axis=0)
    hi = stacked.max(axis=0)
    deltas = np.sort(weights[:, None] * (stacked - lo), axis=0)
    params = np.clip(lo + deltas.sum(axis=0), lo, hi)
    return ModelState(spec=spec, params=params, momentum=np.zeros_like(params))


def save_checkpoint(state: ModelState, path: str | Path) -> None:
    """Binary little-endian checkpoint: dims header then float32 parameters."""
    spec = state.spec
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(struct.pack("<HII", _CHECKPOINT_VERSION, spec.input_dim, spec.num_classes))
        fh.write(struct.pack("<I", len(spec.hidden_sizes)))
        for h in spec.hidden_sizes:
            fh.write(struct.pack("<I", h))
        fh.write(state.params.astype("<f4").tobytes())


def load_checkpoint(path: str | Path) -> ModelState:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _CHECKPOINT_MAGIC:
            raise DataFormatError(f"{path}: bad checkpoint magic {magic!r}")
        version, input_dim, num_classes = struct.unpack("<HII", fh.read(10))
        if version != _CHECKPOINT_VERSION:
            raise DataFormatError(f"{path}: unsupported checkpoint version {version}")
        (n_hidden,) = struct.unpack("<I", fh.read(4))
        hidden = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(n_hidden))
        spec = ModelSpec(input_dim=input_dim, hidden_sizes=hidden, num_classes=num_classes)
        raw = fh.read(spec.num_params * 4)
        if len(raw) != spec.num_params * 4:
            raise DataFormatError(f"{path}: truncated parameter vector")
        params = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    return ModelState(spec=spec, params=params, momentum=np.zeros_like(params))
