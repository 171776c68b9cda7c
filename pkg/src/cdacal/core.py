"""Shared data types and the softmax / likelihood primitives.

All arrays held by the types below are float64 (labels int64) and are marked
read-only after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyDatasetError,
    InvalidInputError,
    InvalidTemperatureError,
    ShapeError,
    UndefinedMetricError,
)

LOG_CLAMP = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _check_labels(labels: np.ndarray, m: int, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != m:
        raise ShapeError(f"expected {m} labels, got shape {labels.shape}")
    if labels.size and not np.issubdtype(labels.dtype, np.integer):
        as_int = labels.astype(np.int64)
        if not np.array_equal(as_int, labels):
            raise InvalidInputError("labels must be integers")
        labels = as_int
    labels = labels.astype(np.int64)
    bad = np.flatnonzero((labels < 0) | (labels >= num_classes))
    if bad.size:
        i = int(bad[0])
        raise InvalidInputError(
            f"label {labels[i]} at row {i} outside [0, {num_classes})"
        )
    return labels


@dataclass(frozen=True)
class LogitSet:
    """Raw pre-softmax scores (M x N) with aligned integer labels."""

    values: np.ndarray
    labels: np.ndarray
    num_classes: int = field(default=-1)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeError(f"logits must be 2-D, got shape {values.shape}")
        m, n = values.shape
        num_classes = n if self.num_classes == -1 else int(self.num_classes)
        if num_classes != n:
            raise ShapeError(f"num_classes={num_classes} but logits have {n} columns")
        if m < 1:
            raise EmptyDatasetError("logit set has no rows")
        if n < 2:
            raise ShapeError("need at least 2 classes")
        bad = ~np.isfinite(values)
        if bad.any():
            i = int(np.flatnonzero(bad.any(axis=1))[0])
            raise InvalidInputError(f"non-finite logit at row {i}")
        labels = _check_labels(self.labels, m, num_classes)
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "num_classes", num_classes)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class ProbSet:
    """Row-stochastic predicted probabilities (M x N) with labels."""

    values: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] < 2:
            raise ShapeError(f"probabilities must be M x N with N >= 2, got {values.shape}")
        if values.shape[0] < 1:
            raise EmptyDatasetError("probability set has no rows")
        if not np.isfinite(values).all():
            raise InvalidInputError("non-finite probability")
        if (values < 0).any() or (values > 1).any():
            raise InvalidInputError("probabilities must lie in [0, 1]")
        sums = values.sum(axis=1)
        off = np.flatnonzero(np.abs(sums - 1.0) > 1e-9)
        if off.size:
            i = int(off[0])
            raise InvalidInputError(f"row {i} sums to {sums[i]!r}, not 1")
        labels = _check_labels(self.labels, values.shape[0], values.shape[1])
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "labels", _frozen(labels))

    @property
    def num_classes(self) -> int:
        return self.values.shape[1]

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class ClassFrequencyProfile:
    """Per-class counts and their max-normalized frequencies.

    Classes with zero count have normalized frequency 0 and are ignored when
    computing the imbalance ratio.
    """

    counts: np.ndarray
    normalized: np.ndarray = field(init=False)
    imbalance_ratio: float = field(init=False)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1 or counts.size < 1:
            raise ShapeError("counts must be a non-empty 1-D array")
        if not np.issubdtype(counts.dtype, np.integer):
            if not np.array_equal(counts, np.round(counts)):
                raise InvalidInputError("counts must be integers")
        counts = counts.astype(np.int64)
        if (counts < 0).any():
            raise InvalidInputError("counts must be non-negative")
        top = counts.max()
        if top == 0:
            raise EmptyDatasetError("all class counts are zero")
        present = counts[counts > 0]
        object.__setattr__(self, "counts", _frozen(counts))
        object.__setattr__(self, "normalized", _frozen(counts / top))
        object.__setattr__(self, "imbalance_ratio", float(top / present.min()))

    @property
    def num_classes(self) -> int:
        return self.counts.size


@dataclass(frozen=True)
class TemperatureVector:
    """Per-class temperatures; a scalar temperature is a constant vector."""

    t: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.t, dtype=np.float64))
        if t.ndim != 1 or t.size < 1:
            raise ShapeError(f"temperatures must be 1-D, got shape {t.shape}")
        if np.isnan(t).any() or not (t > 0).all() or not np.isfinite(t).all():
            raise InvalidTemperatureError(f"temperatures must be finite and > 0, got {t}")
        object.__setattr__(self, "t", _frozen(t))

    @classmethod
    def constant(cls, value: float, num_classes: int) -> TemperatureVector:
        return cls(np.full(num_classes, float(value)))

    @property
    def is_constant(self) -> bool:
        return bool((self.t == self.t[0]).all())

    def __len__(self):
        return self.t.size


@dataclass(frozen=True)
class SoftLabelSet:
    """Target matrix from (possibly class-dependent) label smoothing.

    Rows are not forced to sum to one; `row_sums` records what they sum to.
    """

    values: np.ndarray
    row_sums: np.ndarray = field(init=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeError(f"soft labels must be 2-D, got {values.shape}")
        if (values < 0).any() or (values > 1).any():
            raise InvalidInputError("soft label entries must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "row_sums", _frozen(values.sum(axis=1)))

    def __len__(self):
        return self.values.shape[0]


def _as_temps(temps, n: int) -> np.ndarray:
    if temps is None:
        return np.ones(n)
    if isinstance(temps, TemperatureVector):
        t = temps.t
    else:
        t = TemperatureVector(temps).t
        if t.size == 1:
            t = np.full(n, t[0])
    if t.size != n:
        raise ShapeError(f"{t.size} temperatures for {n} classes")
    return t


def _scaled(logits, temps) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if np.isnan(z).any():
        raise InvalidInputError("NaN in logits")
    return z / _as_temps(temps, z.shape[-1])


def log_softmax(logits, temps=None) -> np.ndarray:
    """Row-wise log-softmax of `logits / temps` (works on 1-D or 2-D input)."""
    s = _scaled(logits, temps)
    s = s - s.max(axis=-1, keepdims=True)
    return s - np.log(np.exp(s).sum(axis=-1, keepdims=True))


def softmax(logits, temps=None) -> np.ndarray:
    """Temperature-scaled softmax with max-subtraction.

    `temps` may be a TemperatureVector, a scalar, or a length-N array; each
    logit column is divided by its own temperature before normalizing.
    """
    s = _scaled(logits, temps)
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def nll(logits: LogitSet, temps=None) -> float:
    """Mean negative log-likelihood (nats) of the true labels."""
    lp = log_softmax(logits.values, temps)
    return float(-lp[np.arange(len(logits)), logits.labels].mean())


def predictions(scores) -> np.ndarray:
    """Argmax per row; ties go to the lowest class index."""
    if isinstance(scores, (LogitSet, ProbSet)):
        scores = scores.values
    return np.argmax(np.asarray(scores), axis=-1)


def accuracy(scores, labels=None) -> float:
    """Fraction of rows whose argmax equals the label.

    Accepts a LogitSet/ProbSet (labels taken from it) or a raw matrix plus
    labels.
    """
    if labels is None:
        if not isinstance(scores, (LogitSet, ProbSet)):
            raise InvalidInputError("labels required for a raw score matrix")
        labels = scores.labels
    pred = predictions(scores)
    labels = np.asarray(labels)
    if pred.shape != labels.shape:
        raise ShapeError(f"{pred.shape[0]} predictions vs {labels.shape[0]} labels")
    if labels.size == 0:
        raise UndefinedMetricError("accuracy of an empty set")
    return float(np.mean(pred == labels))

