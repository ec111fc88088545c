"""Binary-binary Restricted Boltzmann Machine trained with CD-k.

Energy of a joint configuration::

    E(v, h) = -b.v - c.h - v.W.h

with ``W`` of shape (m visible, n hidden). Every inference routine accepts a
single vector or a 2-D batch with one sample per row.
"""
from __future__ import annotations

import itertools
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .core import Prng, as_matrix, as_rng, as_vector, bernoulli_sample, check_finite, sigmoid

__all__ = [
    "Rbm", "TrainConfig", "EpochTrace", "JointTable",
    "energy", "prob_h_given_v", "prob_v_given_h", "sample_h", "sample_v",
    "gibbs_chain", "cd_update", "train", "reconstruction_error", "enumerate_joint",
    "rbm_to_bytes", "rbm_from_bytes", "save_rbm", "load_rbm", "rbm_to_json", "rbm_from_json",
]

RBM_MAGIC = b"EBMR"
RBM_VERSION = 1
_HEADER = struct.Struct("<4sBII")
MAX_ENUMERATION_UNITS = 20


@dataclass
class Rbm:
    W: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.W = as_matrix(self.W, "W").copy()
        self.b = as_vector(self.b, "b").copy()
        self.c = as_vector(self.c, "c").copy()
        m, n = self.W.shape
        if self.b.shape[0] != m or self.c.shape[0] != n:
            raise ValueError(f"bias lengths ({self.b.shape[0]}, {self.c.shape[0]}) "
                             f"do not match W shape {m}x{n}")

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def n(self) -> int:
        return self.W.shape[1]

    @classmethod
    def init(cls, m: int, n: int, rng: Prng | int | None = None, scale: float = 0.01) -> "Rbm":
        """Gaussian weights N(0, scale^2), zero biases."""
        rng = as_rng(rng)
        return cls(rng.normal(scale, (m, n)), np.zeros(m), np.zeros(n))

    @classmethod
    def zeros(cls, m: int, n: int) -> "Rbm":
        return cls(np.zeros((m, n)), np.zeros(m), np.zeros(n))

    def copy(self) -> "Rbm":
        return Rbm(self.W.copy(), self.b.copy(), self.c.copy())


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 1e-5
    epochs: int = 100
    batch_size: int = 64
    cd_k: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.cd_k < 1:
            raise ValueError(f"cd_k must be >= 1, got {self.cd_k}")


@dataclass(frozen=True)
class EpochTrace:
    epoch: int
    mean_reconstruction_error: float


def _visible(rbm: Rbm, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim not in (1, 2) or v.shape[-1] != rbm.m:
        raise ValueError(f"visible input of shape {v.shape} does not match m={rbm.m}")
    return v


def _hidden(rbm: Rbm, h) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.ndim not in (1, 2) or h.shape[-1] != rbm.n:
        raise ValueError(f"hidden input of shape {h.shape} does not match n={rbm.n}")
    return h


def energy(rbm: Rbm, v, h) -> float:
    v = _visible(rbm, v)
    h = _hidden(rbm, h)
    return -(v @ rbm.b) - (h @ rbm.c) - np.einsum("...i,ij,...j->...", v, rbm.W, h)


def prob_h_given_v(rbm: Rbm, v) -> np.ndarray:
    """p(h_j = 1 | v) = sigmoid(c_j + sum_i W_ij v_i)."""
    return sigmoid(rbm.c + _visible(rbm, v) @ rbm.W)


def prob_v_given_h(rbm: Rbm, h) -> np.ndarray:
    """p(v_i = 1 | h) = sigmoid(b_i + sum_j W_ij h_j)."""
    return sigmoid(rbm.b + _hidden(rbm, h) @ rbm.W.T)


def sample_h(rbm: Rbm, v, rng: Prng) -> np.ndarray:
    return bernoulli_sample(prob_h_given_v(rbm, v), rng)


def sample_v(rbm: Rbm, h, rng: Prng) -> np.ndarray:
    return bernoulli_sample(prob_v_given_h(rbm, h), rng)


def _chain(rbm: Rbm, v0, k: int, rng: Prng):
    if k < 1:
        raise ValueError(f"number of Gibbs steps must be >= 1, got {k}")
    v = _visible(rbm, v0)
    for _ in range(k):
        h = sample_h(rbm, v, rng)
        v_prob = prob_v_given_h(rbm, h)
        v = bernoulli_sample(v_prob, rng)
    return v, v_prob, prob_h_given_v(rbm, v)


def gibbs_chain(rbm: Rbm, v0, k: int, rng: Prng):
    """Run ``k`` alternating h|v, v|h sampling steps from ``v0``.

    Returns the final visible sample and p(h | v_k).
    """
    v, _, h_prob = _chain(rbm, v0, k, rng)
    return v, h_prob


def cd_update(rbm: Rbm, batch, cfg: TrainConfig, rng: Prng) -> float:
    """One CD-k parameter update in place; returns the batch reconstruction MSE.

    Data enter the positive phase as probabilities (no binarisation). The
    reconstruction error compares the data with the visible probabilities of
    the last chain step.
    """
    v0 = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if v0.shape[0] == 0 or v0.size == 0:
        raise ValueError("cd_update needs a non-empty batch")
    v0 = _visible(rbm, v0)
    if np.any((v0 < 0.0) | (v0 > 1.0)):
        raise ValueError("visible data must lie in [0, 1]")
    h0 = prob_h_given_v(rbm, v0)
    vk, vk_prob, hk = _chain(rbm, v0, cfg.cd_k, rng)

    scale = cfg.eta / v0.shape[0]
    dW = v0.T @ h0 - vk.T @ hk
    db = (v0 - vk).sum(axis=0)
    dc = (h0 - hk).sum(axis=0)
    rbm.W += scale * dW
    rbm.b += scale * db
    rbm.c += scale * dc
    check_finite("cd_update", rbm.W, rbm.b, rbm.c)
    return float(np.mean((v0 - vk_prob) ** 2))


def reconstruction_error(rbm: Rbm, data) -> float:
    """Deterministic mean-field reconstruction MSE: v -> p(h|v) -> p(v|h)."""
    v = np.atleast_2d(np.asarray(data, dtype=np.float64))
    return float(np.mean((v - prob_v_given_h(rbm, prob_h_given_v(rbm, v))) ** 2))


def iter_batches(n_samples: int, batch_size: int, rng: Prng):
    order = rng.permutation(n_samples)
    for start in range(0, n_samples, batch_size):
        yield order[start:start + batch_size]


def train(rbm: Rbm, data, cfg: TrainConfig, rng: Prng | None = None) -> list[EpochTrace]:
    """Mini-batch CD training; one trace entry per epoch.

    Uses ``Prng(cfg.seed)`` unless a stream is passed explicitly. The last,
    possibly short, batch of each epoch is kept.
    """
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if data.shape[0] == 0:
        raise ValueError("train needs at least one sample")
    rng = as_rng(rng, cfg.seed)
    trace = []
    for epoch in range(cfg.epochs):
        sq_err = 0.0
        for idx in iter_batches(data.shape[0], cfg.batch_size, rng):
            sq_err += cd_update(rbm, data[idx], cfg, rng) * len(idx)
        trace.append(EpochTrace(epoch, sq_err / data.shape[0]))
    return trace


@dataclass
class JointTable:
    """Exact Boltzmann distribution over all (v, h) states."""
    visible_states: np.ndarray   # (2^m, m)
    hidden_states: np.ndarray    # (2^n, n)
    probs: np.ndarray            # (2^m, 2^n)
    log_partition: float = field(default=0.0)

    def visible_marginal(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    def hidden_marginal(self) -> np.ndarray:
        return self.probs.sum(axis=0)

    def p_h_given_v(self, vi: int) -> np.ndarray:
        """p(h_j = 1 | v) for the visible state with row index ``vi``."""
        row = self.probs[vi] / self.probs[vi].sum()
        return row @ self.hidden_states

    def p_v_given_h(self, hj: int) -> np.ndarray:
        col = self.probs[:, hj] / self.probs[:, hj].sum()
        return col @ self.visible_states

    def as_dict(self) -> dict:
        return {(tuple(v.astype(int)), tuple(h.astype(int))): self.probs[i, j]
                for i, v in enumerate(self.visible_states)
                for j, h in enumerate(self.hidden_states)}


def all_states(d: int) -> np.ndarray:
    """Every binary vector of length ``d`` in lexicographic order."""
    return np.array(list(itertools.product((0.0, 1.0), repeat=d))).reshape(2 ** d, d)


def enumerate_joint(rbm: Rbm) -> JointTable:
    if rbm.m + rbm.n > MAX_ENUMERATION_UNITS:
        raise ValueError(f"enumeration limited to m+n <= {MAX_ENUMERATION_UNITS}, "
                         f"got {rbm.m}+{rbm.n}")
    V = all_states(rbm.m)
    H = all_states(rbm.n)
    neg_e = (V @ rbm.b)[:, None] + (H @ rbm.c)[None, :] + V @ rbm.W @ H.T
    shift = neg_e.max()
    unnorm = np.exp(neg_e - shift)
    z = unnorm.sum()
    return JointTable(V, H, unnorm / z, float(np.log(z) + shift))


# --- serialization -----------------------------------------------------------

def rbm_to_bytes(rbm: Rbm) -> bytes:
    """``EBMR`` | u8 version | u32 m | u32 n | b | c | W (row-major), all little-endian."""
    return (_HEADER.pack(RBM_MAGIC, RBM_VERSION, rbm.m, rbm.n)
            + rbm.b.astype("<f8").tobytes()
            + rbm.c.astype("<f8").tobytes()
            + rbm.W.astype("<f8").tobytes())


def rbm_from_bytes(buf: bytes, offset: int = 0) -> tuple[Rbm, int]:
    """Parse one RBM block at ``offset``; returns the model and the end offset."""
    if len(buf) - offset < _HEADER.size:
        raise ValueError(f"truncated RBM header at offset {offset}")
    magic, version, m, n = _HEADER.unpack_from(buf, offset)
    if magic != RBM_MAGIC:
        raise ValueError(f"bad RBM magic {magic!r} at offset {offset}")
    if version != RBM_VERSION:
        raise ValueError(f"unsupported RBM format version {version}")
    pos = offset + _HEADER.size
    need = 8 * (m + n + m * n)
    if len(buf) - pos < need:
        raise ValueError(f"truncated RBM payload at offset {pos}: need {need} bytes")

    def take(count):
        nonlocal pos
        arr = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).astype(np.float64)
        pos += 8 * count
        return arr

    b = take(m)
    c = take(n)
    W = take(m * n).reshape(m, n)
    return Rbm(W, b, c), pos


def save_rbm(rbm: Rbm, path) -> None:
    with open(path, "wb") as fh:
        fh.write(rbm_to_bytes(rbm))


def load_rbm(path) -> Rbm:
    with open(path, "rb") as fh:
        buf = fh.read()
    rbm, end = rbm_from_bytes(buf)
    if end != len(buf):
        raise ValueError(f"{len(buf) - end} trailing bytes after RBM block")
    return rbm


def rbm_to_json(rbm: Rbm) -> str:
    # float repr round-trips exactly
    return json.dumps({"format": "rbm", "version": RBM_VERSION, "m": rbm.m, "n": rbm.n,
                       "b": rbm.b.tolist(), "c": rbm.c.tolist(), "W": rbm.W.tolist()})


def rbm_from_json(text: str) -> Rbm:
    d = json.loads(text)
    if d.get("format") != "rbm":
        raise ValueError("not an RBM JSON document")
    W = np.array(d["W"], dtype=np.float64).reshape(d["m"], d["n"])
    return Rbm(W, d["b"], d["c"])
