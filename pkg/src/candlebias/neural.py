"""Feedforward binary classifier (default 5-128-64-1) trained with Adam.

Hidden layers use the rectifier max(0, z); the single output unit is a
sigmoid. All arithmetic is double precision so the finite-difference
gradient checks in the test suite are meaningful. Training is deterministic
given the init seed, the shuffle seed and the data.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import Standardizer
from .errors import TrainingDivergedError
from .logistic import sigmoid

DEFAULT_LAYER_DIMS = (5, 128, 64, 1)
LOG_EPS = 1e-15


@dataclass
class NetworkModel:
    """Per-layer weight matrices (out x in) and bias vectors."""

    layer_dims: tuple
    weights: list
    biases: list
    seed: int
    standardizer: Standardizer | None = None


@dataclass
class AdamState:
    """First/second moment estimates with the optimizer's default constants."""

    m: list
    v: list
    step_count: int = 0
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    validation_fraction: float = 0.20
    shuffle_seed: int = 0

    def as_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "validation_fraction": self.validation_fraction,
            "shuffle_seed": self.shuffle_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(int(d["epochs"]), int(d["batch_size"]),
                   float(d["validation_fraction"]), int(d["shuffle_seed"]))


@dataclass
class LossHistory:
    train: list = field(default_factory=list)
    validation: list = field(default_factory=list)


def init_network(seed: int, layer_dims=DEFAULT_LAYER_DIMS) -> NetworkModel:
    """Seeded init: weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims, layer_dims[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return NetworkModel(layer_dims=tuple(layer_dims), weights=weights, biases=biases, seed=seed)


def forward(model: NetworkModel, X: np.ndarray, with_cache: bool = False):
    """Probabilities for a batch; optionally also the activation cache for backward."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    activations = [X]
    pre_acts = []
    a = X
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ W.T + b
        pre_acts.append(z)
        a = sigmoid(z) if i == last else np.maximum(0.0, z)
        activations.append(a)
    probs = activations[-1][:, 0]
    if with_cache:
        return probs, {"activations": activations, "pre_acts": pre_acts, "probs": probs}
    return probs


def bce_loss(p: np.ndarray, y: np.ndarray) -> float:
    """Mean of -[y ln p + (1-y) ln(1-p)] with p clamped away from 0 and 1 by 1e-15."""
    p = np.asarray(p, dtype=float)
    y = np.asarray(y, dtype=float)
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: p {p.shape} vs y {y.shape}")
    p = np.clip(p, LOG_EPS, 1.0 - LOG_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def backward(model: NetworkModel, cache: dict, y: np.ndarray):
    """Gradients of :func:`bce_loss` w.r.t. every weight and bias.

    The sigmoid-output/cross-entropy pairing collapses the output delta to
    (p - y) / batch. Raises if the cache does not match the model's shapes.
    """
    y = np.asarray(y, dtype=float)
    activations, pre_acts = cache["activations"], cache["pre_acts"]
    if len(pre_acts) != len(model.weights):
        raise ValueError("cache does not match model depth")
    for z, W in zip(pre_acts, model.weights):
        if z.shape[1] != W.shape[0]:
            raise ValueError("cache does not match model layer shapes")
    batch = len(y)
    if activations[0].shape[0] != batch:
        raise ValueError("cache batch size does not match y")

    delta = ((cache["probs"] - y) / batch)[:, None]
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    for layer in range(len(model.weights) - 1, -1, -1):
        grads_w[layer] = delta.T @ activations[layer]
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer]) * (pre_acts[layer - 1] > 0.0)
    return grads_w, grads_b


def init_adam(model: NetworkModel) -> AdamState:
    shapes = model.weights + model.biases
    return AdamState(m=[np.zeros_like(p) for p in shapes],
                     v=[np.zeros_like(p) for p in shapes])


def adam_step(params: list, grads: list, state: AdamState) -> list:
    """One bias-corrected Adam update; returns new params, mutates state in place."""
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        out.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon))
    return out


def train_network(X: np.ndarray, y: np.ndarray, config: TrainConfig | None = None,
                  seed: int = 0, layer_dims=DEFAULT_LAYER_DIMS):
    """Train on seeded-shuffled mini-batches; returns (model, per-epoch losses).

    The chronologically last validation_fraction of the rows is held out for
    monitoring and never trains. Batches are re-shuffled each epoch from one
    seeded generator; the final short batch is used, not dropped. Epoch losses
    are full-pass evaluations after the epoch's updates.
    """
    config = config or TrainConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n <= config.batch_size:
        raise ValueError(f"need more than batch_size={config.batch_size} rows, got {n}")
    if not (0.0 <= config.validation_fraction < 1.0):
        raise ValueError("validation_fraction must be in [0, 1)")

    n_val = int(n * config.validation_fraction)
    n_fit = n - n_val
    X_fit, y_fit = X[:n_fit], y[:n_fit]
    X_val, y_val = X[n_fit:], y[n_fit:]

    model = init_network(seed, layer_dims)
    params = model.weights + model.biases
    state = init_adam(model)
    n_w = len(model.weights)
    shuffle_rng = np.random.default_rng(config.shuffle_seed)

    history = LossHistory()
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n_fit)
        for start in range(0, n_fit, config.batch_size):
            batch = order[start:start + config.batch_size]
            _, cache = forward(model, X_fit[batch], with_cache=True)
            grads_w, grads_b = backward(model, cache, y_fit[batch])
            params = adam_step(params, grads_w + grads_b, state)
            model.weights = params[:n_w]
            model.biases = params[n_w:]

        train_loss = bce_loss(forward(model, X_fit), y_fit)
        val_loss = bce_loss(forward(model, X_val), y_val) if n_val > 0 else math.nan
        if not math.isfinite(train_loss):
            raise TrainingDivergedError(f"non-finite training loss at epoch {epoch}")
        history.train.append(train_loss)
        history.validation.append(val_loss)
    return model, history


def predict_network(model: NetworkModel, X: np.ndarray) -> np.ndarray:
    """Class labels at threshold 0.5; a probability of exactly 0.5 maps to 1."""
    return (forward(model, X) >= 0.5).astype(np.int64)


def write_loss_history_csv(history: LossHistory, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for i, (tr, va) in enumerate(zip(history.train, history.validation)):
            writer.writerow([i + 1, tr, va])


def to_dict(model: NetworkModel, config: TrainConfig | None = None) -> dict:
    return {
        "layer_dims": list(model.layer_dims),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "seed": model.seed,
        "config": config.as_dict() if config else None,
        "standardizer": model.standardizer.as_dict() if model.standardizer else None,
    }


def from_dict(d: dict):
    std = d.get("standardizer")
    model = NetworkModel(
        layer_dims=tuple(d["layer_dims"]),
        weights=[np.asarray(w, dtype=float) for w in d["weights"]],
        biases=[np.asarray(b, dtype=float) for b in d["biases"]],
        seed=int(d["seed"]),
        standardizer=Standardizer.from_dict(std) if std else None,
    )
    config = TrainConfig.from_dict(d["config"]) if d.get("config") else None
    return model, config
