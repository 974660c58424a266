"""Fully-connected regression network in plain numpy.

ReLU hidden layers, identity output, squared-error loss and Adam.  The
default layout maps 4 features through hidden widths 32-64-128-64 to one
scalar.
"""

from __future__ import annotations

import io
import json
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod

HIDDEN_WIDTHS = (32, 64, 128, 64)
DEFAULT_WIDTHS = (4,) + HIDDEN_WIDTHS + (1,)
CHECKPOINT_MAGIC = b"RISMLP\x00\x01"
CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass
class MlpModel:
    weights: list  # weights[i] has shape (widths[i], widths[i+1])
    biases: list

    @property
    def widths(self) -> tuple:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def parameter_counts(self) -> list[int]:
        return [w.size + b.size for w, b in zip(self.weights, self.biases)]

    def copy(self) -> "MlpModel":
        return MlpModel([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def parameters(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    @classmethod
    def initialize(cls, widths=DEFAULT_WIDTHS, seed: int = 0) -> "MlpModel":
        """He-uniform weights scaled by fan-in, zero biases."""
        rng = rngmod.stream(seed, rngmod.INIT)
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            limit = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @classmethod
    def zeros(cls, widths=DEFAULT_WIDTHS) -> "MlpModel":
        return cls([np.zeros((a, b)) for a, b in zip(widths[:-1], widths[1:])],
                   [np.zeros(b) for b in widths[1:]])


def _forward_cached(model: MlpModel, X: np.ndarray):
    acts = [X]
    h = X
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ W + b
        if i < last:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return acts


def forward(model: MlpModel, features: np.ndarray) -> np.ndarray:
    """Network output for one feature vector (scalar) or a batch (B,)."""
    X = np.asarray(features, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.widths[0]:
        raise ValueError(f"expected {model.widths[0]} features, got {X.shape[1]}")
    out = _forward_cached(model, X)[-1][:, 0]
    return float(out[0]) if single else out


def backward(model: MlpModel, features: np.ndarray, labels) -> tuple[float, list[np.ndarray]]:
    """Mean squared error over the batch and its gradient for every parameter.

    Gradients are ordered as ``model.parameters()``: W0, b0, W1, b1, ...
    """
    X = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.atleast_1d(np.asarray(labels, dtype=float))
    acts = _forward_cached(model, X)
    resid = acts[-1][:, 0] - y
    B = X.shape[0]
    loss = float(np.mean(resid**2))
    delta = (2.0 / B) * resid[:, None]
    grads = []
    for i in range(len(model.weights) - 1, -1, -1):
        grads.append(delta.sum(axis=0))
        grads.append(acts[i].T @ delta)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    grads.reverse()
    return loss, grads


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_model(cls, model: MlpModel, lr: float = 0.01, **kw) -> "AdamState":
        params = model.parameters()
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], lr=lr, **kw)


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
    """Bias-corrected Adam update applied in place to ``params``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter/gradient/state length mismatch")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


@dataclass
class Normalizer:
    """Per-feature z-score plus label scaling, fitted on training data only."""

    mean: np.ndarray
    std: np.ndarray
    label_mean: float
    label_std: float

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray) -> "Normalizer":
        X = np.asarray(X, dtype=float)
        std = X.std(axis=0)
        std = np.where(std > 1e-12 * np.maximum(np.abs(X.mean(axis=0)), 1.0), std, 1.0)
        ys = float(np.std(y))
        return cls(X.mean(axis=0), std, float(np.mean(y)), ys if ys > 0 else 1.0)

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def transform_label(self, y):
        return (np.asarray(y, dtype=float) - self.label_mean) / self.label_std

    def inverse_label(self, t):
        return np.asarray(t) * self.label_std + self.label_mean


@dataclass
class TrainResult:
    model: MlpModel
    normalizer: Normalizer
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = -1
    seconds: float = 0.0


def _mse(model, X, y, chunk=65536):
    if len(y) == 0:
        return float("nan")
    total = 0.0
    for s in range(0, len(y), chunk):
        total += float(np.sum((forward(model, X[s:s + chunk]) - y[s:s + chunk]) ** 2))
    return total / len(y)


def train(model: MlpModel, X_train, y_train, X_val=None, y_val=None, epochs: int = 200,
          batch: int = 128, lr: float = 0.01, seed: int = 0) -> TrainResult:
    """Minibatch Adam on squared error; keeps the best-validation snapshot.

    Losses in the history are full-pass MSEs in normalized label units.
    Without a validation split the final snapshot is returned.
    """
    X_train = np.asarray(X_train, dtype=float)
    y_train = np.asarray(y_train, dtype=float)
    if len(y_train) == 0:
        raise ValueError("empty training split")
    norm = Normalizer.fit(X_train, y_train)
    Xt, yt = norm.transform(X_train), norm.transform_label(y_train)
    has_val = X_val is not None and len(y_val) > 0
    if has_val:
        Xv, yv = norm.transform(X_val), norm.transform_label(np.asarray(y_val, dtype=float))

    model = model.copy()
    params = model.parameters()
    state = AdamState.for_model(model, lr=lr)
    result = TrainResult(model, norm)
    best = np.inf
    t0 = time.perf_counter()
    n = len(yt)
    for epoch in range(epochs):
        order = rngmod.stream(seed, rngmod.SHUFFLE, epoch).permutation(n)
        for s in range(0, n, batch):
            idx = order[s:s + batch]
            _, grads = backward(model, Xt[idx], yt[idx])
            adam_step(state, params, grads)
        tr = _mse(model, Xt, yt)
        va = _mse(model, Xv, yv) if has_val else tr
        result.train_loss.append(tr)
        result.val_loss.append(va)
        if not (np.isfinite(tr) and np.isfinite(va)):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}", result)
        if va < best:
            best = va
            result.model = model.copy()
            result.best_epoch = epoch
    if not has_val:
        result.model = model.copy()
        result.best_epoch = epochs - 1
    result.seconds = time.perf_counter() - t0
    return result


def predict(model: MlpModel, normalizer: Normalizer | None, features) -> np.ndarray | complex:
    """Effective-gain estimate(s) as zero-imaginary complex numbers."""
    if normalizer is None:
        raise ValueError("normalizer has not been fitted")
    X = np.asarray(features, dtype=float)
    out = normalizer.inverse_label(forward(model, normalizer.transform(X)))
    out = np.asarray(out, dtype=float) + 0j
    return complex(out) if out.ndim == 0 else out


def save_checkpoint(path, model: MlpModel, normalizer: Normalizer, meta: dict | None = None) -> None:
    """Binary checkpoint, little-endian throughout.

    magic(8) | version u32 | n_widths u32 | widths u32[n] | meta_len u32 | meta JSON utf-8
    | per layer: W f64[in*out] row-major, b f64[out]
    | feature mean f64[in] | feature std f64[in] | label mean f64 | label std f64
    """
    widths = model.widths
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode()
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<II", CHECKPOINT_VERSION, len(widths)))
    buf.write(struct.pack(f"<{len(widths)}I", *widths))
    buf.write(struct.pack("<I", len(meta_bytes)))
    buf.write(meta_bytes)
    for W, b in zip(model.weights, model.biases):
        buf.write(np.ascontiguousarray(W, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
    buf.write(np.asarray(normalizer.mean, dtype="<f8").tobytes())
    buf.write(np.asarray(normalizer.std, dtype="<f8").tobytes())
    buf.write(struct.pack("<dd", normalizer.label_mean, normalizer.label_std))
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path) -> tuple[MlpModel, Normalizer, dict]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a model checkpoint")
    pos = 8
    version, n = struct.unpack_from("<II", data, pos)
    pos += 8
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    widths = struct.unpack_from(f"<{n}I", data, pos)
    pos += 4 * n
    (meta_len,) = struct.unpack_from("<I", data, pos)
    pos += 4
    meta = json.loads(data[pos:pos + meta_len].decode())
    pos += meta_len

    def take(count):
        nonlocal pos
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=pos).astype(float)
        pos += 8 * count
        return arr

    weights, biases = [], []
    for a, b in zip(widths[:-1], widths[1:]):
        weights.append(take(a * b).reshape(a, b))
        biases.append(take(b))
    mean, std = take(widths[0]), take(widths[0])
    label_mean, label_std = take(2)
    return MlpModel(weights, biases), Normalizer(mean, std, float(label_mean), float(label_std)), meta
