"""Dense feed-forward regressors in plain numpy: forward, backprop, adamax, training loop.

Weights are stored per layer as ``(outputs, inputs)`` matrices so that a layer
computes ``a @ W.T + b``. The last layer is linear; every hidden layer applies
the model's activation (leaky ReLU or SELU).
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .features import (
    N_FEATURES,
    NormStats,
    extract_many,
    fit_normalizer,
    inverse_target,
    normalize,
    transform_target,
)
from .linkmodel import LabeledRecord, Scenario

log = logging.getLogger(__name__)

LEAKY_SLOPE = 0.01
SELU_LAMBDA = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772
LOSS_EPS = 1e-12

ACTIVATIONS = ("leaky_relu", "selu")
PRESETS = {
    "ann": ("leaky_relu", (512, 256, 128, 64, 32, 16, 8, 4)),
    "snn": ("selu", (64,) * 16),
}


class TrainingDiverged(RuntimeError):
    pass


def activation(kind: str, x):
    x = np.asarray(x, dtype=float)
    if kind == "leaky_relu":
        # max(x, s*x) equals the leaky ReLU for 0 < s < 1
        return np.maximum(x, LEAKY_SLOPE * x)
    if kind == "selu":
        return SELU_LAMBDA * np.where(x > 0, x, SELU_ALPHA * np.expm1(np.minimum(x, 0.0)))
    raise ValueError(f"unknown activation {kind!r}")


def _activation_inplace(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "leaky_relu":
        return np.maximum(z, LEAKY_SLOPE * z, out=z)
    return activation(kind, z)


def activation_grad(kind: str, x):
    x = np.asarray(x, dtype=float)
    if kind == "leaky_relu":
        return np.where(x > 0, 1.0, LEAKY_SLOPE)
    if kind == "selu":
        return SELU_LAMBDA * np.where(x > 0, 1.0, SELU_ALPHA * np.exp(np.minimum(x, 0.0)))
    raise ValueError(f"unknown activation {kind!r}")


@dataclass
class MlpModel:
    layer_sizes: tuple[int, ...]
    activation: str
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    norm_stats: Optional[NormStats] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.layer_sizes = tuple(int(n) for n in self.layer_sizes)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.layer_sizes[-1] != 1:
            raise ValueError("output layer must have a single unit")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("layer count does not match layer_sizes")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_sizes[i + 1], self.layer_sizes[i])
            if W.shape != shape or b.shape != (shape[0],):
                raise ValueError(f"layer {i}: expected weight {shape}, got {W.shape}")

    @classmethod
    def initialize(cls, layer_sizes: Sequence[int], activation: str,
                   rng: np.random.Generator) -> "MlpModel":
        """He-normal weights for leaky ReLU, LeCun-normal for SELU; zero biases."""
        gain = 2.0 if activation == "leaky_relu" else 1.0
        weights, biases = [], []
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            weights.append(rng.normal(0.0, math.sqrt(gain / n_in), size=(n_out, n_in)))
            biases.append(np.zeros(n_out))
        return cls(tuple(layer_sizes), activation, weights, biases)

    @classmethod
    def preset(cls, name: str, rng: np.random.Generator, n_inputs: int = N_FEATURES) -> "MlpModel":
        if name not in PRESETS:
            raise ValueError(f"unknown architecture {name!r}; choose from {sorted(PRESETS)}")
        act, hidden = PRESETS[name]
        return cls.initialize((n_inputs, *hidden, 1), act, rng)

    @property
    def n_hidden(self) -> int:
        return len(self.layer_sizes) - 2

    @property
    def model_id(self) -> str:
        return self.metadata.get("model_id", f"{self.metadata.get('arch', 'mlp')}")

    def forward(self, X, cache: bool = False):
        """Predictions in transformed-target units for a normalized batch ``X``."""
        a = np.asarray(X, dtype=float)
        single = a.ndim == 1
        if single:
            a = a[None, :]
        if a.shape[1] != self.layer_sizes[0]:
            raise ValueError(f"expected {self.layer_sizes[0]} inputs, got {a.shape[1]}")
        acts, pre = [a], []
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W.T
            z += b
            if cache:
                a = z if i == last else activation(self.activation, z)
                pre.append(z)
                acts.append(a)
            else:
                a = z if i == last else _activation_inplace(self.activation, z)
        out = a[:, 0]
        if cache:
            return out, (acts, pre)
        return out[0] if single else out

    def predict_eta(self, scenarios: Sequence[Scenario]) -> np.ndarray:
        X = normalize(extract_many(scenarios), self.norm_stats)
        return inverse_target(self.forward(X), self.norm_stats)

    # --- serialization

    def to_dict(self) -> dict:
        return {
            "architecture": {"layer_sizes": list(self.layer_sizes),
                             "preset": self.metadata.get("arch")},
            "activation": self.activation,
            "layers": [{"weight": W.tolist(), "bias": b.tolist()}
                       for W, b in zip(self.weights, self.biases)],
            "norm_stats": None if self.norm_stats is None else self.norm_stats.to_dict(),
            "target_transform": {"kind": "log10_eta_zscore",
                                 "mean": None if self.norm_stats is None else self.norm_stats.target_mean,
                                 "std": None if self.norm_stats is None else self.norm_stats.target_std},
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        ns = d.get("norm_stats")
        return cls(
            tuple(d["architecture"]["layer_sizes"]),
            d["activation"],
            [np.array(layer["weight"], dtype=float) for layer in d["layers"]],
            [np.array(layer["bias"], dtype=float) for layer in d["layers"]],
            None if ns is None else NormStats.from_dict(ns),
            d.get("metadata", {}),
        )

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, separators=(",", ":"))

    @classmethod
    def load(cls, path) -> "MlpModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def rms_loss(pred, target) -> float:
    r = np.asarray(pred) - np.asarray(target)
    return math.sqrt(float(np.mean(r * r)) + LOSS_EPS)


def backward(model: MlpModel, X, y):
    """RMS loss of a batch and its gradients w.r.t. every weight and bias."""
    y = np.asarray(y, dtype=float)
    pred, (acts, pre) = model.forward(X, cache=True)
    r = pred - y
    loss = math.sqrt(float(np.mean(r * r)) + LOSS_EPS)
    delta = (r / (len(y) * loss))[:, None]
    gW = [None] * len(model.weights)
    gb = [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        gW[i] = delta.T @ acts[i]
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i]) * activation_grad(model.activation, pre[i - 1])
    return loss, gW, gb


class Adamax:
    """Adamax (infinity-norm Adam) over a list of parameter arrays, updated in place."""

    def __init__(self, params: Sequence[np.ndarray], beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.u = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray], lr: float,
             t: Optional[int] = None) -> None:
        self.t = self.t + 1 if t is None else t
        if self.t < 1:
            raise ValueError("step index must be >= 1")
        scale = lr / (1 - self.beta1 ** self.t)
        for p, g, m, u in zip(params, grads, self.m, self.u):
            m *= self.beta1
            m += (1 - self.beta1) * g
            np.maximum(self.beta2 * u, np.abs(g), out=u)
            p -= scale * m / (u + self.eps)


def adamax_step(state: Adamax, params, grads, lr: float, t: int):
    state.step(params, grads, lr, t)
    return params


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    lr0: float = 0.01
    lr_decade_every: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    split: tuple[float, float, float] = (0.70, 0.15, 0.15)
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if abs(sum(self.split) - 1.0) > 1e-9 or min(self.split) < 0:
            raise ValueError(f"split fractions must be non-negative and sum to 1, got {self.split}")


def lr_at(epoch: int, config: TrainConfig) -> float:
    if not 1 <= epoch <= config.epochs:
        raise ValueError(f"epoch {epoch} outside 1..{config.epochs}")
    return config.lr0 * 10.0 ** (-((epoch - 1) // config.lr_decade_every))


def split_indices(n: int, fractions=(0.70, 0.15, 0.15), seed: int = 0):
    """Shuffled (train, validation, test) index arrays."""
    n_train = int(round(n * fractions[0]))
    n_val = int(round(n * fractions[1]))
    perm = np.random.default_rng(seed).permutation(n)
    return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]


@dataclass
class EpochLog:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float


def write_loss_log(rows: Sequence[EpochLog], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "lr", "train_loss", "val_loss"])
        for r in rows:
            w.writerow([r.epoch, repr(r.lr), repr(r.train_loss), repr(r.val_loss)])


def _eval_loss(model: MlpModel, X, y, chunk: int = 4096) -> float:
    if len(y) == 0:
        return float("nan")
    pred = np.concatenate([model.forward(X[i:i + chunk]) for i in range(0, len(y), chunk)])
    return rms_loss(pred, y)


def train(records: Sequence[LabeledRecord], arch: str, config: TrainConfig = TrainConfig(),
          progress: Optional[Callable[[EpochLog], None]] = None):
    """Train a preset network on labelled records.

    Returns ``(model, loss_log, splits)`` where ``splits`` holds the
    train/validation/test index arrays into ``records``. Normalization
    statistics come from the training split only and are embedded in the model.
    """
    if len(records) < 100:
        raise ValueError(f"training needs at least 100 records, got {len(records)}")
    tr, va, te = split_indices(len(records), config.split, config.seed)
    X = extract_many([r.scenario for r in records])
    eta = np.array([r.eta for r in records])
    model, history = fit_arrays(X, eta, tr, va, arch, config, progress)
    model.metadata = {
        "arch": arch,
        "model_id": f"{arch}-seed{config.seed}",
        "seed": config.seed,
        "epochs_trained": config.epochs,
        "train_config": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(config).items()},
        "n_records": len(records),
        "split_sizes": [len(tr), len(va), len(te)],
        # record ids seen during fitting; evaluation refuses to score them
        "fit_record_ids": sorted(int(records[i].scenario.seed) for i in np.concatenate([tr, va])),
    }
    return model, history, (tr, va, te)


def fit_arrays(X: np.ndarray, eta: np.ndarray, train_idx, val_idx, arch: str,
               config: TrainConfig = TrainConfig(),
               progress: Optional[Callable[[EpochLog], None]] = None):
    """Training loop on a raw feature matrix; returns ``(model, loss_log)``."""
    rng = np.random.default_rng(config.seed)
    stats = fit_normalizer(X[train_idx], eta[train_idx])
    Xn = normalize(X, stats)
    y = transform_target(eta, stats)
    Xtr, ytr = Xn[train_idx], y[train_idx]
    Xva, yva = Xn[val_idx], y[val_idx]

    model = MlpModel.preset(arch, rng, n_inputs=X.shape[1])
    model.norm_stats = stats
    params = [*model.weights, *model.biases]
    opt = Adamax(params, config.beta1, config.beta2, config.eps)

    history = []
    for epoch in range(1, config.epochs + 1):
        lr = lr_at(epoch, config)
        order = rng.permutation(len(Xtr))
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            _, gW, gb = backward(model, Xtr[idx], ytr[idx])
            opt.step(params, [*gW, *gb], lr)
        row = EpochLog(epoch, lr, _eval_loss(model, Xtr, ytr), _eval_loss(model, Xva, yva))
        if not (math.isfinite(row.train_loss) and all(np.isfinite(W).all() for W in model.weights)):
            raise TrainingDiverged(
                f"loss became non-finite at epoch {epoch} (lr={lr:g}); "
                f"last finite log: {history[-1] if history else None}")
        history.append(row)
        log.debug("epoch %d lr %.0e train %.5f val %.5f", epoch, lr, row.train_loss, row.val_loss)
        if progress is not None:
            progress(row)
    return model, history
