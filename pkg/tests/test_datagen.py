import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdacal import io
from cdacal.datagen import (
    TEST,
    TRAIN,
    VAL,
    Dataset,
    SyntheticSpec,
    frequency_profile,
    longtail_counts,
    sample_gaussian_mixture,
    stratified_holdout,
)
from cdacal.distill import TrainConfig, model_logits, train
from cdacal.core import accuracy
from cdacal.errors import EmptyDatasetError, InfeasibleSpecError, InvalidSpecError


@pytest.mark.parametrize("n", [2, 5, 10])
def test_ratio_one_gives_flat_counts(n):
    assert longtail_counts(250, n, 1.0).tolist() == [250] * n


def test_two_class_endpoints():
    assert longtail_counts(100, 2, 100).tolist() == [100, 1]


def test_closed_form_per_index():
    counts = longtail_counts(1000, 10, 100)
    for i, c in enumerate(counts):
        raw = 1000 * 100 ** (-i / 9)
        assert c == max(1, math.floor(raw + 0.5))
    assert counts[0] == 1000 and counts[-1] == 10


def test_infeasible_ratio():
    with pytest.raises(InfeasibleSpecError):
        longtail_counts(50, 10, 100)
    with pytest.raises(InvalidSpecError):
        longtail_counts(50, 10, 0.5)


@given(st.integers(10, 5000), st.integers(2, 50), st.floats(1.0, 10.0))
def test_counts_monotone_and_ratio_within_one(max_per_class, n, ratio):
    counts = longtail_counts(max_per_class, n, ratio)
    assert np.all(np.diff(counts) <= 0)
    assert counts.min() >= 1
    # endpoint ratio within rounding of one count on the rarest class
    lo, hi = max_per_class / (counts[-1] + 1), max_per_class / max(counts[-1] - 1, 1e-9)
    assert lo <= ratio * (1 + 1e-12) and ratio <= hi * (1 + 1e-12)


def test_frequency_profile_examples():
    p = frequency_profile([0, 0, 1], 2)
    assert p.counts.tolist() == [2, 1]
    assert p.normalized.tolist() == [1.0, 0.5]
    assert frequency_profile([0, 1, 2, 0, 1, 2], 3).normalized.tolist() == [1.0, 1.0, 1.0]
    cifar = frequency_profile(np.repeat(np.arange(100), longtail_counts(500, 100, 10)), 100)
    assert cifar.normalized[0] == 1.0
    assert abs(cifar.normalized[99] - 0.1) <= 1 / 500


def test_frequency_profile_absent_class():
    p = frequency_profile([0, 0, 0, 2], 3)
    assert p.normalized[1] == 0.0
    assert p.imbalance_ratio == 3.0
    with pytest.raises(EmptyDatasetError):
        frequency_profile([], 3)


def test_spec_validation():
    with pytest.raises(InvalidSpecError):
        SyntheticSpec(feature_dim=0)
    with pytest.raises(InvalidSpecError):
        SyntheticSpec(class_separation=0.0)


def test_generation_is_deterministic(tmp_path):
    spec = SyntheticSpec(max_per_class=200, imbalance_ratio=10, seed=7, test_per_class=20)
    a, b = sample_gaussian_mixture(spec), sample_gaussian_mixture(spec)
    assert np.array_equal(a.features, b.features) and np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.split, b.split)
    io.save_dataset(a, tmp_path / "a")
    io.save_dataset(b, tmp_path / "b")
    for name in ("train", "val", "test"):
        for ext in (".json", ".bin", ".labels"):
            assert (tmp_path / "a" / f"{name}{ext}").read_bytes() == (tmp_path / "b" / f"{name}{ext}").read_bytes()
    other = sample_gaussian_mixture(SyntheticSpec(max_per_class=200, imbalance_ratio=10, seed=8))
    assert not np.array_equal(other.features[:5], a.features[:5])


def test_profile_matches_spec_ratio():
    ds = sample_gaussian_mixture(SyntheticSpec(num_classes=10, max_per_class=1000, imbalance_ratio=100))
    assert ds.profile.counts.tolist() == longtail_counts(1000, 10, 100).tolist()
    assert ds.profile.imbalance_ratio == pytest.approx(100, rel=0.1)
    recount = np.bincount(ds.labels, minlength=10)
    assert recount.tolist() == ds.profile.counts.tolist()


def test_split_is_stratified():
    ds = sample_gaussian_mixture(SyntheticSpec(max_per_class=500, imbalance_ratio=50, holdout_fraction=0.2))
    val, tr = ds.val(), ds.train()
    assert len(val) + len(tr) == len(ds)
    total = ds.profile.counts
    for c in range(ds.num_classes):
        assert val.profile.counts[c] >= 1 and tr.profile.counts[c] >= 1
        assert abs(val.profile.counts[c] - 0.2 * total[c]) <= 1
    assert ds.test() is None


def test_balanced_test_split():
    ds = sample_gaussian_mixture(SyntheticSpec(max_per_class=300, imbalance_ratio=10, test_per_class=50))
    assert ds.test().profile.counts.tolist() == [50] * 10
    assert set(np.unique(ds.split)) == {TRAIN, VAL, TEST}


def test_stratified_holdout_singletons_stay_in_train(rng):
    labels = np.array([0, 0, 0, 0, 1, 2, 2])
    mask = stratified_holdout(labels, 0.5, rng)
    assert not mask[4]
    assert mask[labels == 0].sum() == 2 and mask[labels == 2].sum() == 1


@given(st.lists(st.integers(0, 4), min_size=1, max_size=60), st.floats(0.05, 0.95))
@settings(max_examples=50)
def test_holdout_keeps_both_sides(labels, frac):
    labels = np.array(labels)
    mask = stratified_holdout(labels, frac, np.random.default_rng(0))
    for c in np.unique(labels):
        members = labels == c
        if members.sum() >= 2:
            assert mask[members].any() and (~mask[members]).any()
        else:
            assert not mask[members].any()


def test_class_means_have_requested_norm():
    ds = sample_gaussian_mixture(SyntheticSpec(num_classes=4, max_per_class=4000, imbalance_ratio=1, feature_dim=3,
                                               class_separation=5.0, holdout_fraction=0))
    for c in range(4):
        centre = ds.features[ds.labels == c].mean(axis=0)
        assert abs(np.linalg.norm(centre) - 5.0) < 0.1


def test_balanced_separable_data_is_learnable():
    ds = sample_gaussian_mixture(SyntheticSpec(num_classes=5, max_per_class=400, imbalance_ratio=1,
                                               feature_dim=16, class_separation=6.0, test_per_class=200))
    model = train(ds.train(), TrainConfig(epochs=5, seed=1)).model
    assert accuracy(model_logits(model, ds.test())) > 0.95


def test_dataset_rejects_misaligned():
    with pytest.raises(Exception):
        Dataset(np.zeros((3, 2)), [0, 1], 2)
    d = Dataset(np.zeros((3, 2)), [0, 1, 1], 2)
    assert d.feature_dim == 2 and len(d) == 3 and d.val() is None
    assert VAL not in d.split
