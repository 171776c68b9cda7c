"""Synthetic long-tailed Gaussian-mixture datasets.

Class sizes follow the exponential profile used for CIFAR-LT style
benchmarks, n_i = max_per_class * ratio ** (-i / (N - 1)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ClassFrequencyProfile, _frozen
from .errors import EmptyDatasetError, InfeasibleSpecError, InvalidInputError, InvalidSpecError


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic long-tailed mixture.

    `holdout_fraction` of each class (stratified, so long-tailed) becomes the
    validation split. `test_per_class > 0` additionally draws a balanced test
    split from the same mixture, as in CIFAR-LT style benchmarks where only
    the training data is imbalanced.
    """

    num_classes: int = 10
    max_per_class: int = 1000
    imbalance_ratio: float = 100.0
    feature_dim: int = 32
    class_separation: float = 3.0
    seed: int = 0
    holdout_fraction: float = 0.2
    test_per_class: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise InvalidSpecError("num_classes must be >= 2")
        if self.feature_dim < 1:
            raise InvalidSpecError("feature_dim must be >= 1")
        if not self.class_separation > 0:
            raise InvalidSpecError("class_separation must be > 0")
        if not 0 <= self.holdout_fraction < 1:
            raise InvalidSpecError("holdout_fraction must be in [0, 1)")
        if self.test_per_class < 0:
            raise InvalidSpecError("test_per_class must be >= 0")


TRAIN, VAL, TEST = 0, 1, 2
SPLIT_NAMES = {TRAIN: "train", VAL: "val", TEST: "test"}


@dataclass(frozen=True)
class Dataset:
    """Features, labels and their frequency profile.

    `split` tags each row TRAIN, VAL or TEST; `train()`, `val()` and `test()`
    return the parts with recounted profiles.
    """

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    profile: ClassFrequencyProfile = field(init=False)
    split: np.ndarray = None
    seed: int = 0

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2 or features.shape[0] != labels.shape[0]:
            raise InvalidInputError(
                f"features {features.shape} do not align with {labels.shape[0]} labels"
            )
        split = (
            np.zeros(labels.shape[0], dtype=np.int8)
            if self.split is None
            else np.asarray(self.split, dtype=np.int8)
        )
        if split.shape != labels.shape:
            raise InvalidInputError("split tags do not align with labels")
        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "split", _frozen(split))
        object.__setattr__(self, "profile", frequency_profile(labels, self.num_classes))

    def __len__(self):
        return self.labels.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, mask) -> Dataset:
        return Dataset(self.features[mask], self.labels[mask], self.num_classes, seed=self.seed)

    def part(self, tag: int) -> Dataset | None:
        mask = self.split == tag
        return self.subset(mask) if mask.any() else None

    def train(self) -> Dataset:
        return self.part(TRAIN)

    def val(self) -> Dataset | None:
        return self.part(VAL)

    def test(self) -> Dataset | None:
        return self.part(TEST)


def longtail_counts(max_per_class: int, num_classes: int, imbalance_ratio: float) -> np.ndarray:
    """Exponentially decaying per-class counts, rounded half-up with a floor of 1."""
    if num_classes < 2:
        raise InvalidSpecError("num_classes must be >= 2")
    if not imbalance_ratio >= 1:
        raise InvalidSpecError(f"imbalance ratio must be >= 1, got {imbalance_ratio}")
    if max_per_class / imbalance_ratio < 1:
        raise InfeasibleSpecError(
            f"max_per_class={max_per_class} with ratio {imbalance_ratio} leaves "
            "the rarest class with fewer than one sample"
        )
    idx = np.arange(num_classes)
    raw = max_per_class * float(imbalance_ratio) ** (-idx / (num_classes - 1))
    return np.maximum(np.floor(raw + 0.5), 1).astype(np.int64)


def frequency_profile(labels, num_classes: int) -> ClassFrequencyProfile:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise InvalidInputError(f"labels outside [0, {num_classes})")
    counts = np.bincount(labels, minlength=num_classes)
    if counts.sum() == 0:
        raise EmptyDatasetError("no labels to count")
    return ClassFrequencyProfile(counts)


def class_means(num_classes: int, feature_dim: int, separation: float, rng) -> np.ndarray:
    """Seeded directions on the unit sphere, scaled by `separation`."""
    d = rng.standard_normal((num_classes, feature_dim))
    norms = np.linalg.norm(d, axis=1, keepdims=True)
    # a zero draw is measure-zero but would give a NaN direction
    norms[norms == 0] = 1.0
    return separation * d / norms


def stratified_holdout(labels, fraction: float, rng) -> np.ndarray:
    """Boolean mask selecting about `fraction` of each class.

    A class with at least two members keeps at least one on each side;
    singleton classes stay entirely in the training part.
    """
    labels = np.asarray(labels)
    mask = np.zeros(labels.shape[0], dtype=bool)
    if fraction == 0:
        return mask
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        count = members.size
        if count < 2:
            continue
        k = int(np.floor(count * fraction + 0.5))
        k = min(max(k, 1), count - 1)
        mask[rng.permutation(members)[:k]] = True
    return mask


def sample_gaussian_mixture(spec: SyntheticSpec) -> Dataset:
    """Draw a long-tailed isotropic Gaussian mixture with its splits.

    Features are rounded to float32 precision so the on-disk format is
    lossless. Draw order (part of the reproducibility contract): class means,
    per-class samples in class order, the stratified validation split, then
    the balanced test draw.
    """
    counts = longtail_counts(spec.max_per_class, spec.num_classes, spec.imbalance_ratio)
    rng = np.random.default_rng(spec.seed)
    means = class_means(spec.num_classes, spec.feature_dim, spec.class_separation, rng)
    labels = np.repeat(np.arange(spec.num_classes), counts)
    features = means[labels] + rng.standard_normal((labels.size, spec.feature_dim))
    split = np.where(stratified_holdout(labels, spec.holdout_fraction, rng), VAL, TRAIN)
    if spec.test_per_class:
        extra = np.repeat(np.arange(spec.num_classes), spec.test_per_class)
        extra_x = means[extra] + rng.standard_normal((extra.size, spec.feature_dim))
        labels = np.r_[labels, extra]
        features = np.vstack([features, extra_x])
        split = np.r_[split, np.full(extra.size, TEST)]
    features = features.astype(np.float32).astype(np.float64)
    return Dataset(features, labels, spec.num_classes, split=split, seed=spec.seed)
