"""Desk-scale classifier, SGD-with-momentum training and self-distillation.

The model is multinomial logistic regression, optionally with one tanh
hidden layer. Gradients are written out by hand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    LOG_CLAMP,
    LogitSet,
    ProbSet,
    TemperatureVector,
    _as_temps,
    accuracy,
    log_softmax,
    softmax,
)
from .datagen import Dataset
from .errors import InvalidInputError, ShapeError, TrainingDivergedError
from .metrics import MetricsConfig, bin_stats, ece
from .smooth import CDA_LS_GAMMA, SmoothingVector, cda_alpha, soft_ce_from_logits, soft_labels

LOSS_MODES = ("ce", "ls", "cda-ls")


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: np.ndarray
    hidden_weights: np.ndarray | None = None
    hidden_bias: np.ndarray | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(f"weights {self.weights.shape} / bias {self.bias.shape} mismatch")
        if (self.hidden_weights is None) != (self.hidden_bias is None):
            raise ShapeError("hidden weights and bias must be given together")
        if self.hidden_weights is not None:
            self.hidden_weights = np.asarray(self.hidden_weights, dtype=np.float64)
            self.hidden_bias = np.asarray(self.hidden_bias, dtype=np.float64)
            if self.hidden_weights.shape[0] != self.weights.shape[1]:
                raise ShapeError("hidden width does not match output layer")
        if not all(np.isfinite(p).all() for p in self.params().values()):
            raise InvalidInputError("non-finite model parameters")

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def input_dim(self) -> int:
        if self.hidden_weights is not None:
            return self.hidden_weights.shape[1]
        return self.weights.shape[1]

    @property
    def hidden_width(self) -> int:
        return 0 if self.hidden_weights is None else self.hidden_weights.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        out = {"weights": self.weights, "bias": self.bias}
        if self.hidden_weights is not None:
            out["hidden_weights"] = self.hidden_weights
            out["hidden_bias"] = self.hidden_bias
        return out

    def copy(self) -> LinearModel:
        return LinearModel(**{k: v.copy() for k, v in self.params().items()})


def init_model(num_classes, input_dim, rng, hidden=0, scale=0.01) -> LinearModel:
    if hidden:
        w1 = rng.standard_normal((hidden, input_dim)) / math.sqrt(input_dim)
        w = scale * rng.standard_normal((num_classes, hidden))
        return LinearModel(w, np.zeros(num_classes), w1, np.zeros(hidden))
    w = scale * rng.standard_normal((num_classes, input_dim))
    return LinearModel(w, np.zeros(num_classes))


def _forward_cache(model: LinearModel, x: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ShapeError(f"features {x.shape} do not match model input dim {model.input_dim}")
    h = x
    if model.hidden_weights is not None:
        h = np.tanh(x @ model.hidden_weights.T + model.hidden_bias)
    return h @ model.weights.T + model.bias, (x, h)


def forward(model: LinearModel, features) -> np.ndarray:
    """Logits z = W x + b for each row (through tanh(W1 x + b1) if hidden)."""
    return _forward_cache(model, features)[0]


def model_logits(model: LinearModel, dataset: Dataset) -> LogitSet:
    return LogitSet(forward(model, dataset.features), dataset.labels, model.num_classes)


def backward(model: LinearModel, cache, dz: np.ndarray) -> dict[str, np.ndarray]:
    """Parameter gradients given d(loss)/d(logits)."""
    x, h = cache
    grads = {"weights": dz.T @ h, "bias": dz.sum(axis=0)}
    if model.hidden_weights is not None:
        da = (dz @ model.weights) * (1.0 - h * h)
        grads["hidden_weights"] = da.T @ x
        grads["hidden_bias"] = da.sum(axis=0)
    return grads


def kd_from_logits(teacher_logits, student_logits, temps) -> tuple[float, np.ndarray]:
    """Mean KL(p_t || p_s) over rows, with per-class temperature scaling.

    Both distributions are softmax(z / T) with T applied per class column. The
    teacher is a constant; the gradient w.r.t. the student logits is
    (p_s * sum(p_t) - p_t) / T, divided by the row count.
    """
    zt = np.atleast_2d(np.asarray(teacher_logits, dtype=np.float64))
    zs = np.atleast_2d(np.asarray(student_logits, dtype=np.float64))
    if zt.shape != zs.shape:
        raise ShapeError(f"teacher {zt.shape} vs student {zs.shape}")
    t = _as_temps(temps, zs.shape[1])
    floor = np.log(LOG_CLAMP)
    lpt = np.maximum(log_softmax(zt, t), floor)
    lps_raw = log_softmax(zs, t)
    lps = np.maximum(lps_raw, floor)
    pt = np.exp(log_softmax(zt, t))
    m = zs.shape[0]
    loss = float(np.sum(pt * (lpt - lps)) / m)
    grad = (np.exp(lps_raw) * pt.sum(axis=1, keepdims=True) - pt) / t / m
    return loss, grad


def kd_loss(teacher_row, student_row, temps) -> float:
    """KL divergence between temperature-scaled teacher and student softmaxes."""
    return kd_from_logits(teacher_row, student_row, temps)[0]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 128
    learning_rate: float = 0.1
    momentum: float = 0.9
    seed: int = 0
    loss_mode: str = "ce"
    alpha: float = 0.1
    gamma: float = CDA_LS_GAMMA
    l2: float = 0.0
    hidden: int = 0
    init_scale: float = 0.01

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidInputError("epochs must be >= 1")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise InvalidInputError("learning_rate must be >= 0")
        if not 0 <= self.momentum < 1:
            raise InvalidInputError("momentum must lie in [0, 1)")
        if self.loss_mode not in LOSS_MODES:
            raise InvalidInputError(f"loss_mode must be one of {LOSS_MODES}, got {self.loss_mode!r}")
        if self.l2 < 0:
            raise InvalidInputError("l2 must be >= 0")


@dataclass(frozen=True)
class DistillConfig:
    temps: TemperatureVector
    fuse_lambda: float = 0.5
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if not 0 <= self.fuse_lambda <= 1:
            raise InvalidInputError("fuse_lambda must lie in [0, 1]")


@dataclass
class TrainResult:
    model: LinearModel
    trace: list[dict]


def training_targets(dataset: Dataset, cfg: TrainConfig):
    """Target matrix for the configured loss mode, built from the training labels."""
    n = dataset.num_classes
    if cfg.loss_mode == "ce":
        smoothing = SmoothingVector.constant(0.0, n)
    elif cfg.loss_mode == "ls":
        smoothing = SmoothingVector.constant(cfg.alpha, n)
    else:
        smoothing = cda_alpha(cfg.alpha, dataset.profile, cfg.gamma)
    return soft_labels(dataset.labels, smoothing, n).values


def _sgd(dataset: Dataset, cfg: TrainConfig, batch_loss, val: Dataset | None) -> TrainResult:
    rng = np.random.default_rng(cfg.seed)
    model = init_model(dataset.num_classes, dataset.features.shape[1], rng, cfg.hidden, cfg.init_scale)
    params = model.params()
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    x_all = dataset.features
    m = len(dataset)
    trace = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(m)
        for start in range(0, m, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            # overflow shows up as a non-finite loss or parameter, checked explicitly
            with np.errstate(over="ignore", invalid="ignore"):
                z, cache = _forward_cache(model, x_all[idx])
                loss, dz = batch_loss(idx, z)
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"loss became {loss} in epoch {epoch}")
            grads = backward(model, cache, dz)
            for k, p in params.items():
                g = grads[k]
                if cfg.l2 and k.endswith("weights"):
                    g = g + cfg.l2 * p
                velocity[k] = cfg.momentum * velocity[k] + g
                with np.errstate(over="ignore", invalid="ignore"):
                    p -= cfg.learning_rate * velocity[k]
                if not np.isfinite(p).all():
                    raise TrainingDivergedError(f"non-finite {k} in epoch {epoch}")
        with np.errstate(over="ignore", invalid="ignore"):
            full_loss, _ = batch_loss(np.arange(m), forward(model, x_all))
        if not math.isfinite(full_loss):
            raise TrainingDivergedError(f"training diverged in epoch {epoch}")
        row = {"epoch": epoch, "train_loss": full_loss, "val_acc": None, "val_ece": None}
        if val is not None and len(val):
            probs = ProbSet(softmax(forward(model, val.features)), val.labels)
            row["val_acc"] = accuracy(probs)
            row["val_ece"] = ece(bin_stats(probs, MetricsConfig()))
        trace.append(row)
    return TrainResult(model, trace)


def train(dataset: Dataset, cfg: TrainConfig = TrainConfig(), val: Dataset | None = None) -> TrainResult:
    """Minibatch SGD with momentum on the soft-label CE of the chosen loss mode.

    The per-epoch trace records the full training-set loss after the epoch
    (data term only, without the L2 penalty) and, if `val` is given, its
    accuracy and ECE.
    """
    targets = training_targets(dataset, cfg)

    def batch_loss(idx, z):
        return soft_ce_from_logits(z, targets[idx])

    return _sgd(dataset, cfg, batch_loss, val)


def self_distill(teacher: LinearModel, dataset: Dataset, cfg: DistillConfig, val: Dataset | None = None) -> TrainResult:
    """Train a fresh student on (1 - lambda) * CE(hard labels) + lambda * KD.

    Teacher logits are computed once up front. The student's CE term always
    uses hard labels, whatever `cfg.train.loss_mode` says.
    """
    if teacher.input_dim != dataset.features.shape[1] or teacher.num_classes != dataset.num_classes:
        raise ShapeError("teacher does not match the dataset dimensions")
    temps = _as_temps(cfg.temps, dataset.num_classes)
    tcfg = replace(cfg.train, loss_mode="ce")
    targets = training_targets(dataset, tcfg)
    teacher_z = forward(teacher, dataset.features)
    lam = cfg.fuse_lambda

    def batch_loss(idx, z):
        ce_loss, ce_grad = soft_ce_from_logits(z, targets[idx])
        kd, kd_grad = kd_from_logits(teacher_z[idx], z, temps)
        return (1 - lam) * ce_loss + lam * kd, (1 - lam) * ce_grad + lam * kd_grad

    return _sgd(dataset, tcfg, batch_loss, val)
