"""Calibration and uncertainty metrics, reliability-diagram and per-class data.

Every binned metric uses equal-width bins over [0, 1] with intervals
(lo, hi]; 0 itself falls in the first bin.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import LOG_CLAMP, ClassFrequencyProfile, ProbSet, accuracy
from .errors import InvalidInputError, ShapeError, WrongBinningError

SCHEMA_VERSION = "1.0"

CONFIDENCE = "confidence"
UNCERTAINTY = "uncertainty"


@dataclass(frozen=True)
class MetricsConfig:
    num_bins: int = 10
    tace_threshold: float = 1e-3
    tace_ranges: int = 10

    def __post_init__(self):
        if self.num_bins < 2:
            raise InvalidInputError("num_bins must be >= 2")
        if not 0 <= self.tace_threshold < 1:
            raise InvalidInputError("tace_threshold must lie in [0, 1)")
        if self.tace_ranges < 1:
            raise InvalidInputError("tace_ranges must be >= 1")


@dataclass(frozen=True)
class BinReport:
    """Per-bin statistics. Empty bins have count 0 and zero means."""

    num_bins: int
    counts: np.ndarray
    accuracy: np.ndarray
    confidence: np.ndarray
    uncertainty: np.ndarray
    mode: str

    @property
    def error(self) -> np.ndarray:
        return np.where(self.counts > 0, 1.0 - self.accuracy, 0.0)

    @property
    def edges(self) -> np.ndarray:
        return bin_edges(self.num_bins)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def bin_edges(num_bins: int) -> np.ndarray:
    return np.arange(num_bins + 1) / num_bins


def bin_index(values, num_bins: int) -> np.ndarray:
    """Index of the (lo, hi] bin holding each value; 0 maps to bin 0."""
    idx = np.searchsorted(bin_edges(num_bins), np.asarray(values), side="left") - 1
    return np.clip(idx, 0, num_bins - 1)


def _bin_means(idx, values, num_bins):
    counts = np.bincount(idx, minlength=num_bins)
    sums = np.bincount(idx, weights=values, minlength=num_bins)
    means = np.divide(sums, counts, out=np.zeros(num_bins), where=counts > 0)
    return counts, means


def predictive_uncertainty(probs) -> np.ndarray:
    """Normalized entropy H(p) / log N, row-wise; 0 log 0 is taken as 0."""
    p = np.asarray(probs, dtype=np.float64)
    n = p.shape[-1]
    plogp = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    h = -plogp.sum(axis=-1) / np.log(n)
    return np.clip(h, 0.0, 1.0)


def _report(probs: ProbSet, cfg: MetricsConfig, mode: str) -> BinReport:
    p = probs.values
    conf = p.max(axis=1)
    correct = (np.argmax(p, axis=1) == probs.labels).astype(np.float64)
    unc = predictive_uncertainty(p)
    key = conf if mode == CONFIDENCE else unc
    idx = bin_index(key, cfg.num_bins)
    counts, acc = _bin_means(idx, correct, cfg.num_bins)
    _, mean_conf = _bin_means(idx, conf, cfg.num_bins)
    _, mean_unc = _bin_means(idx, unc, cfg.num_bins)
    return BinReport(cfg.num_bins, counts, acc, mean_conf, mean_unc, mode)


def bin_stats(probs: ProbSet, cfg: MetricsConfig = MetricsConfig()) -> BinReport:
    """Bin samples by confidence (max-class probability)."""
    return _report(probs, cfg, CONFIDENCE)


def uncertainty_bin_stats(probs: ProbSet, cfg: MetricsConfig = MetricsConfig()) -> BinReport:
    """Bin samples by normalized predictive entropy."""
    return _report(probs, cfg, UNCERTAINTY)


def _weighted_gap(counts, a, b) -> float:
    total = counts.sum()
    return float(np.sum(counts / total * np.abs(a - b)))


def ece(report: BinReport) -> float:
    if report.mode != CONFIDENCE:
        raise WrongBinningError("ECE needs a confidence-binned report")
    return _weighted_gap(report.counts, report.accuracy, report.confidence)


def uce(probs: ProbSet, cfg: MetricsConfig = MetricsConfig()) -> float:
    report = uncertainty_bin_stats(probs, cfg)
    return _weighted_gap(report.counts, report.error, report.uncertainty)


def sce(probs: ProbSet, cfg: MetricsConfig = MetricsConfig()) -> float:
    """Static calibration error: class-wise ECE averaged over classes.

    For class c, samples are binned by p_c; Acc is the fraction of a bin whose
    label is c and Conf the mean p_c.
    """
    p = probs.values
    m, n = p.shape
    total = 0.0
    for c in range(n):
        idx = bin_index(p[:, c], cfg.num_bins)
        counts, acc = _bin_means(idx, (probs.labels == c).astype(np.float64), cfg.num_bins)
        _, conf = _bin_means(idx, p[:, c], cfg.num_bins)
        total += np.sum(counts / m * np.abs(acc - conf))
    return float(total / n)


def tace(probs: ProbSet, cfg: MetricsConfig = MetricsConfig()) -> float:
    """Thresholded adaptive calibration error.

    Per class, probabilities below the threshold are dropped and the rest are
    split (in ascending order, stable) into `tace_ranges` equal-count ranges;
    earlier ranges take the remainder. The unweighted mean of |Acc - Conf|
    runs over populated class-range cells only.
    """
    p = probs.values
    gaps = []
    for c in range(p.shape[1]):
        keep = np.flatnonzero(p[:, c] >= cfg.tace_threshold)
        if keep.size == 0:
            continue
        order = keep[np.argsort(p[keep, c], kind="stable")]
        for cell in np.array_split(order, cfg.tace_ranges):
            if cell.size == 0:
                continue
            acc = np.mean(probs.labels[cell] == c)
            conf = np.mean(p[cell, c])
            gaps.append(abs(acc - conf))
    if not gaps:
        return 0.0
    return float(np.sum(gaps) / len(gaps))


def brier(probs: ProbSet) -> float:
    """Multiclass Brier score, mean over samples of sum_c (p_c - onehot_c)^2."""
    p = probs.values
    onehot = np.zeros_like(p)
    onehot[np.arange(p.shape[0]), probs.labels] = 1.0
    return float(np.mean(np.sum((p - onehot) ** 2, axis=1)))


def prob_nll(probs: ProbSet) -> float:
    py = probs.values[np.arange(len(probs)), probs.labels]
    return float(-np.mean(np.log(np.maximum(py, LOG_CLAMP))))


def reliability_rows(report: BinReport) -> list[dict]:
    """One row per bin, empty bins included.

    Confidence-binned reports give (acc, conf); uncertainty-binned reports
    give (err, uncert). `gap` is the absolute difference of the pair.
    """
    edges = report.edges
    if report.mode == CONFIDENCE:
        first, second, names = report.accuracy, report.confidence, ("acc", "conf")
    else:
        first, second, names = report.error, report.uncertainty, ("err", "uncert")
    rows = []
    for b in range(report.num_bins):
        n = int(report.counts[b])
        a, s = (float(first[b]), float(second[b])) if n else (0.0, 0.0)
        rows.append({
            "bin_lo": float(edges[b]),
            "bin_hi": float(edges[b + 1]),
            "n": n,
            names[0]: a,
            names[1]: s,
            "gap": abs(a - s),
            "empty": n == 0,
        })
    return rows


def confidence_by_class(probs: ProbSet, profile: ClassFrequencyProfile) -> list[dict]:
    """Mean probability assigned to the true class, per class.

    `count` and `freq_normalized` come from `profile` (normally the training
    split); classes with no evaluation samples get mean_confidence None.
    """
    if profile.num_classes != probs.num_classes:
        raise ShapeError(f"profile has {profile.num_classes} classes, probabilities {probs.num_classes}")
    rows = []
    for c in range(probs.num_classes):
        members = probs.labels == c
        mean_conf = float(probs.values[members, c].mean()) if members.any() else None
        rows.append({
            "class": c,
            "count": int(profile.counts[c]),
            "freq_normalized": float(profile.normalized[c]),
            "mean_confidence": mean_conf,
        })
    return rows


def metric_report(probs: ProbSet, cfg: MetricsConfig = MetricsConfig()) -> dict:
    """All metrics for one probability set, in the report-file layout."""
    return {
        "schema_version": SCHEMA_VERSION,
        "m": len(probs),
        "n_classes": probs.num_classes,
        "acc": accuracy(probs),
        "ece": ece(bin_stats(probs, cfg)),
        "sce": sce(probs, cfg),
        "tace": tace(probs, cfg),
        "brier": brier(probs),
        "uce": uce(probs, cfg),
        "nll": prob_nll(probs),
        "config": asdict(cfg),
    }
