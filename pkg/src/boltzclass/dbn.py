"""Deep Belief Network classifier: a greedily pretrained RBM stack with a
softmax output layer, fine-tuned end to end by backpropagation."""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import rbm as rbm_mod
from .core import Prng, as_matrix, as_rng, as_vector, check_finite, sigmoid
from .rbm import Rbm, TrainConfig, iter_batches

__all__ = ["DbnClassifier", "FineTuneConfig", "greedy_pretrain", "forward", "softmax",
           "loss_and_grads", "fine_tune", "predict", "predict_proba",
           "dbn_to_bytes", "dbn_from_bytes", "save_dbn", "load_dbn", "dbn_to_json",
           "dbn_from_json"]

DBN_MAGIC = b"EBMN"
DBN_VERSION = 1
_HEADER = struct.Struct("<4sBII")


@dataclass
class DbnClassifier:
    layers: list[Rbm]
    softmax_W: np.ndarray
    softmax_bias: np.ndarray
    # per-layer pretraining traces; not serialized
    pretrain_traces: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a DBN needs at least one layer")
        for lower, upper in zip(self.layers, self.layers[1:]):
            if upper.m != lower.n:
                raise ValueError(f"layer chaining broken: {lower.m}x{lower.n} "
                                 f"followed by {upper.m}x{upper.n}")
        self.softmax_W = as_matrix(self.softmax_W, "softmax_W").copy()
        self.softmax_bias = as_vector(self.softmax_bias, "softmax_bias").copy()
        if self.softmax_W.shape[0] != self.layers[-1].n:
            raise ValueError(f"softmax_W has {self.softmax_W.shape[0]} rows, "
                             f"top layer has {self.layers[-1].n} units")
        if self.softmax_bias.shape[0] != self.softmax_W.shape[1]:
            raise ValueError("softmax bias length does not match class count")

    @property
    def input_dim(self) -> int:
        return self.layers[0].m

    @property
    def num_classes(self) -> int:
        return self.softmax_W.shape[1]

    @property
    def shapes(self) -> list[tuple[int, int]]:
        return [(layer.m, layer.n) for layer in self.layers]

    def copy(self) -> "DbnClassifier":
        return DbnClassifier([l.copy() for l in self.layers], self.softmax_W.copy(),
                             self.softmax_bias.copy())


@dataclass(frozen=True)
class FineTuneConfig:
    eta: float = 1e-5
    epochs: int = 100
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def greedy_pretrain(layer_dims, data, cfg: TrainConfig, rng: Prng | None = None,
                    num_classes: int = 2, init_scale: float = 0.01) -> DbnClassifier:
    """Train each RBM on the mean-field hidden activations of the one below.

    ``layer_dims`` lists the input dimension followed by every hidden layer
    size, e.g. ``(2500, 500, 500)``.
    """
    layer_dims = [int(d) for d in layer_dims]
    if len(layer_dims) < 2:
        raise ValueError("layer_dims needs the input size plus at least one hidden layer")
    x = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if x.shape[0] == 0:
        raise ValueError("greedy_pretrain needs at least one sample")
    if x.shape[1] != layer_dims[0]:
        raise ValueError(f"data dimension {x.shape[1]} does not match input size {layer_dims[0]}")
    rng = as_rng(rng, cfg.seed)

    layers, traces = [], []
    for m, n in zip(layer_dims, layer_dims[1:]):
        layer = Rbm.init(m, n, rng, init_scale)
        traces.append(rbm_mod.train(layer, x, cfg, rng))
        layers.append(layer)
        x = rbm_mod.prob_h_given_v(layer, x)

    dbn = DbnClassifier(layers, rng.normal(init_scale, (layer_dims[-1], num_classes)),
                        np.zeros(num_classes))
    dbn.pretrain_traces = traces
    return dbn


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(dbn: DbnClassifier, v):
    """Deterministic pass; returns (activations per layer, class probabilities).

    ``activations[0]`` is the input itself.
    """
    a = np.asarray(v, dtype=np.float64)
    if a.ndim not in (1, 2) or a.shape[-1] != dbn.input_dim:
        raise ValueError(f"input of shape {a.shape} does not match input size {dbn.input_dim}")
    acts = [a]
    for layer in dbn.layers:
        a = sigmoid(layer.c + a @ layer.W)
        acts.append(a)
    return acts, softmax(a @ dbn.softmax_W + dbn.softmax_bias)


def predict_proba(dbn: DbnClassifier, v) -> np.ndarray:
    return forward(dbn, v)[1]


def predict(dbn: DbnClassifier, v):
    """Most probable class; ties go to the lowest index."""
    probs = predict_proba(dbn, v)
    out = np.argmax(probs, axis=-1)
    return int(out) if probs.ndim == 1 else out


def _check_labels(y, num_classes: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError("labels must be 1-D")
    if y.size and (y.min() < 0 or y.max() >= num_classes):
        bad = y[(y < 0) | (y >= num_classes)][0]
        raise ValueError(f"label {bad} outside [0, {num_classes})")
    return y.astype(np.int64)


def loss_and_grads(dbn: DbnClassifier, X, y):
    """Mean cross-entropy over the batch and its gradient for every parameter.

    Gradients come back as ``{"W": [...], "c": [...], "softmax_W", "softmax_bias"}``
    with per-layer lists ordered bottom-up.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = _check_labels(y, dbn.num_classes)
    acts, probs = forward(dbn, X)
    B = X.shape[0]
    loss = -np.mean(np.log(np.maximum(probs[np.arange(B), y], 1e-300)))

    delta = probs.copy()
    delta[np.arange(B), y] -= 1.0
    delta /= B
    grads = {"softmax_W": acts[-1].T @ delta, "softmax_bias": delta.sum(axis=0),
             "W": [None] * len(dbn.layers), "c": [None] * len(dbn.layers)}
    upstream = delta @ dbn.softmax_W.T
    for l in range(len(dbn.layers) - 1, -1, -1):
        a = acts[l + 1]
        pre = upstream * a * (1.0 - a)
        grads["W"][l] = acts[l].T @ pre
        grads["c"][l] = pre.sum(axis=0)
        upstream = pre @ dbn.layers[l].W.T
    return float(loss), grads


def fine_tune(dbn: DbnClassifier, X, y, cfg: FineTuneConfig, rng: Prng | None = None) -> list[float]:
    """Plain mini-batch SGD on mean cross-entropy; returns mean loss per epoch."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = _check_labels(y, dbn.num_classes)
    if X.shape[0] == 0:
        raise ValueError("fine_tune needs at least one sample")
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} samples but {y.shape[0]} labels")
    rng = as_rng(rng, cfg.seed)
    trace = []
    for _ in range(cfg.epochs):
        total = 0.0
        for idx in iter_batches(X.shape[0], cfg.batch_size, rng):
            loss, g = loss_and_grads(dbn, X[idx], y[idx])
            total += loss * len(idx)
            for layer, gW, gc in zip(dbn.layers, g["W"], g["c"]):
                layer.W -= cfg.eta * gW
                layer.c -= cfg.eta * gc
            dbn.softmax_W -= cfg.eta * g["softmax_W"]
            dbn.softmax_bias -= cfg.eta * g["softmax_bias"]
        check_finite("fine_tune", dbn.softmax_W, *(l.W for l in dbn.layers))
        trace.append(total / X.shape[0])
    return trace


# --- serialization -----------------------------------------------------------

def dbn_to_bytes(dbn: DbnClassifier) -> bytes:
    """``EBMN`` | u8 version | u32 layers | u32 classes | RBM blocks | softmax W | softmax bias."""
    parts = [_HEADER.pack(DBN_MAGIC, DBN_VERSION, len(dbn.layers), dbn.num_classes)]
    parts += [rbm_mod.rbm_to_bytes(layer) for layer in dbn.layers]
    parts.append(dbn.softmax_W.astype("<f8").tobytes())
    parts.append(dbn.softmax_bias.astype("<f8").tobytes())
    return b"".join(parts)


def dbn_from_bytes(buf: bytes) -> DbnClassifier:
    if len(buf) < _HEADER.size:
        raise ValueError("truncated DBN header")
    magic, version, n_layers, k = _HEADER.unpack_from(buf, 0)
    if magic != DBN_MAGIC:
        raise ValueError(f"bad DBN magic {magic!r}")
    if version != DBN_VERSION:
        raise ValueError(f"unsupported DBN format version {version}")
    pos = _HEADER.size
    layers = []
    for _ in range(n_layers):
        layer, pos = rbm_mod.rbm_from_bytes(buf, pos)
        layers.append(layer)
    top = layers[-1].n if layers else 0
    need = 8 * (top * k + k)
    if len(buf) - pos != need:
        raise ValueError(f"softmax block at offset {pos}: expected {need} bytes, "
                         f"found {len(buf) - pos}")
    sw = np.frombuffer(buf, "<f8", top * k, pos).astype(np.float64).reshape(top, k)
    sb = np.frombuffer(buf, "<f8", k, pos + 8 * top * k).astype(np.float64)
    return DbnClassifier(layers, sw, sb)


def save_dbn(dbn: DbnClassifier, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dbn_to_bytes(dbn))


def load_dbn(path) -> DbnClassifier:
    with open(path, "rb") as fh:
        return dbn_from_bytes(fh.read())


def dbn_to_json(dbn: DbnClassifier) -> str:
    return json.dumps({
        "format": "dbn", "version": DBN_VERSION,
        "layers": [json.loads(rbm_mod.rbm_to_json(l)) for l in dbn.layers],
        "softmax_W": dbn.softmax_W.tolist(), "softmax_bias": dbn.softmax_bias.tolist(),
    })


def dbn_from_json(text: str) -> DbnClassifier:
    d = json.loads(text)
    if d.get("format") != "dbn":
        raise ValueError("not a DBN JSON document")
    layers = [rbm_mod.rbm_from_json(json.dumps(l)) for l in d["layers"]]
    sw = np.array(d["softmax_W"], dtype=np.float64).reshape(layers[-1].n, -1)
    return DbnClassifier(layers, sw, d["softmax_bias"])
