"""Uniform and class-distribution-aware label smoothing, and soft-label CE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LOG_CLAMP, ClassFrequencyProfile, SoftLabelSet, _frozen, log_softmax
from .errors import InvalidSmoothingError, ShapeError

CDA_LS_GAMMA = 0.01


@dataclass(frozen=True)
class SmoothingVector:
    alpha: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=np.float64))
        if a.ndim != 1:
            raise ShapeError("smoothing vector must be 1-D")
        if not ((a >= 0) & (a < 1)).all():
            raise InvalidSmoothingError(f"smoothing factors must lie in [0, 1), got {a}")
        object.__setattr__(self, "alpha", _frozen(a))

    @classmethod
    def constant(cls, alpha: float, num_classes: int) -> SmoothingVector:
        return cls(np.full(num_classes, float(alpha)))

    def __len__(self):
        return self.alpha.size


def cda_alpha(alpha: float, profile: ClassFrequencyProfile, gamma: float = CDA_LS_GAMMA) -> SmoothingVector:
    """alpha_c = alpha + gamma * f_c; head classes are smoothed hardest."""
    if not 0 <= alpha < 1:
        raise InvalidSmoothingError(f"alpha must lie in [0, 1), got {alpha}")
    if gamma < 0:
        raise InvalidSmoothingError(f"gamma must be >= 0, got {gamma}")
    if alpha + gamma >= 1:
        raise InvalidSmoothingError(
            f"alpha + gamma = {alpha + gamma} >= 1 leaves no mass on the true class"
        )
    return SmoothingVector(alpha + gamma * profile.normalized)


def soft_labels(labels, smoothing: SmoothingVector, num_classes: int, renormalize: bool = False) -> SoftLabelSet:
    """Targets onehot * (1 - alpha) + alpha / N, with alpha applied per class.

    Entry (i, c) is (1 - alpha_c) + alpha_c / N when c is the label and
    alpha_c / N otherwise. With a non-constant vector rows sum to
    1 - alpha_y + mean(alpha) and are left that way unless `renormalize`.
    """
    labels = np.asarray(labels, dtype=np.int64)
    a = smoothing.alpha
    if a.size == 1:
        a = np.full(num_classes, a[0])
    if a.size != num_classes:
        raise ShapeError(f"{a.size} smoothing factors for {num_classes} classes")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ShapeError(f"labels outside [0, {num_classes})")
    rows = np.arange(labels.size)
    targets = np.tile(a / num_classes, (labels.size, 1))
    targets[rows, labels] = (1 - a[labels]) + a[labels] / num_classes
    if renormalize:
        targets /= targets.sum(axis=1, keepdims=True)
    return SoftLabelSet(targets)


def soft_ce_loss(probs_row, targets_row) -> float:
    """sum_c -t_c log p_c with p clamped at 1e-12."""
    p = np.maximum(np.asarray(probs_row, dtype=np.float64), LOG_CLAMP)
    return float(-np.sum(np.asarray(targets_row) * np.log(p)))


def soft_ce_from_logits(logits, targets) -> tuple[float, np.ndarray]:
    """Mean soft-label CE over rows and its gradient w.r.t. the logits.

    Uses the same 1e-12 clamp as `soft_ce_loss`, applied to log-probabilities.
    Targets need not sum to one, so d/dz = p * sum(t) - t per row; the clamp's
    zero gradient is ignored (it only matters below p = 1e-12).
    """
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if z.shape != t.shape:
        raise ShapeError(f"logits {z.shape} vs targets {t.shape}")
    lp = log_softmax(z)
    m = z.shape[0]
    loss = float(-np.sum(t * np.maximum(lp, np.log(LOG_CLAMP))) / m)
    grad = (np.exp(lp) * t.sum(axis=1, keepdims=True) - t) / m
    return loss, grad
