"""
Tests for seeded generators, balanced samplers and stratified folds

Run with: python -m pytest tests/test_sampling.py -v
"""

import numpy as np
import pytest

from src.errors import ConfigInvalid, SingleClassDataset, TooFewClassMembers
from src.sampling import (
    bootstrap,
    derive_seed,
    make_rng,
    random_undersample,
    stratified_kfold,
    weighted_balanced_sample,
)


def test_make_rng_reproducible():
    assert np.array_equal(make_rng(42).random(5), make_rng(42).random(5))
    assert not np.array_equal(make_rng(42).random(5), make_rng(43).random(5))


def test_derive_seed_is_stable_and_key_sensitive():
    """Child seeds depend only on the parent seed and the key path"""
    assert derive_seed(7, 1, 0) == derive_seed(7, 1, 0)
    assert derive_seed(7, 1, 0) != derive_seed(7, 2, 0)
    assert derive_seed(7, 1, 0) != derive_seed(7, 1, 1)
    assert derive_seed(7, 1, 0) != derive_seed(8, 1, 0)


def test_random_undersample_balances_exactly():
    """Every minority row plus as many majority rows, across many seeds"""
    rng = np.random.default_rng(0)
    for seed in range(100):
        labels = (rng.random(rng.integers(10, 200)) < 0.2).astype(int)
        if labels.sum() == 0 or labels.sum() == len(labels):
            continue
        sample = random_undersample(labels, make_rng(seed))
        chosen = labels[sample.indices]
        assert chosen.sum() * 2 == len(chosen)
        assert len(np.unique(sample.indices)) == len(sample.indices)
        assert set(np.flatnonzero(labels == 1)) <= set(sample.indices.tolist())
        assert np.all(np.diff(sample.indices) > 0)


def test_random_undersample_examples():
    sample = random_undersample([0, 0, 0, 0, 1, 1], make_rng(1))
    assert len(sample) == 4
    assert {4, 5} <= set(sample.indices.tolist())

    equal = random_undersample([0, 1, 0, 1], make_rng(1))
    assert equal.indices.tolist() == [0, 1, 2, 3]

    with pytest.raises(SingleClassDataset):
        random_undersample([0, 0, 0], make_rng(1))


def test_weighted_balanced_sample_balances_and_follows_weights():
    """Zero-weight majority rows are never drawn while enough weighted rows exist"""
    labels = np.array([1, 1, 0, 0, 0, 0, 0, 0])
    weights = np.array([1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0])
    for seed in range(20):
        sample = weighted_balanced_sample(labels, weights, make_rng(seed))
        assert sample.indices.tolist() == [0, 1, 6, 7]
        assert np.array_equal(sample.weights, weights[sample.indices])


def test_bootstrap_bounds():
    sample = bootstrap(50, make_rng(3))
    assert len(sample) == 50
    assert sample.indices.min() >= 0 and sample.indices.max() < 50


def test_stratified_kfold_properties():
    """Folds partition the rows and per-class fold counts differ by at most one"""
    rng = np.random.default_rng(5)
    for trial in range(500):
        K = int(rng.integers(2, 8))
        n_pos = int(rng.integers(K, 40))
        n_neg = int(rng.integers(K, 80))
        labels = rng.permutation(np.array([1] * n_pos + [0] * n_neg))
        plan = stratified_kfold(labels, K, make_rng(trial))

        tests = [plan.test_indices(k) for k in range(K)]
        assert sorted(np.concatenate(tests).tolist()) == list(range(len(labels)))
        for cls in (0, 1):
            counts = [int(np.sum(labels[t] == cls)) for t in tests]
            assert max(counts) - min(counts) <= 1


def test_stratified_kfold_sixty_balanced_rows():
    """K=6 on 30/30 rows: every fold trains on 50 and tests on 10"""
    labels = np.array([0, 1] * 30)
    plan = stratified_kfold(labels, 6, make_rng(0))
    for k, train, test in plan.splits():
        assert len(train) == 50 and len(test) == 10
        assert not set(train.tolist()) & set(test.tolist())


def test_stratified_kfold_errors():
    with pytest.raises(TooFewClassMembers):
        stratified_kfold([0] * 10 + [1] * 3, 4, make_rng(0))
    with pytest.raises(ConfigInvalid):
        stratified_kfold([0, 1, 0, 1], 1, make_rng(0))
