"""
Balancing and resampling machinery shared by the ensembles and the CV driver

Random numbers come from numpy's PCG64 bit generator (a documented, portable
64-bit permuted congruential generator). Child seeds are derived with
numpy SeedSequence spawn keys, so a component's stream depends only on the
parent seed and its own key path:

    derive_seed(experiment_seed, classifier_code, fold)   -> model seed
    derive_seed(model_seed, member)                       -> member seed

Callers own their generators; nothing here keeps global RNG state.
"""

from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from .errors import ConfigInvalid, SingleClassDataset, TooFewClassMembers

_SEED_MOD = 2 ** 64


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator"""
    return np.random.Generator(np.random.PCG64(int(seed) % _SEED_MOD))


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed for the component addressed by `keys` under `seed`"""
    seq = np.random.SeedSequence(int(seed) % _SEED_MOD, spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True, eq=False)
class IndexSample:
    """
    Row ordinals into a parent matrix, optionally with per-row weights

    Attributes:
        indices: Row ordinals (may repeat for bootstrap samples)
        weights: Optional nonnegative weights parallel to indices
    """
    indices: np.ndarray
    weights: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.indices)


def _class_indices(labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels)
    negatives = np.flatnonzero(labels == 0)
    positives = np.flatnonzero(labels == 1)
    if len(negatives) == 0 or len(positives) == 0:
        raise SingleClassDataset("both classes must be present")
    return negatives, positives


def random_undersample(labels, rng: np.random.Generator) -> IndexSample:
    """
    All minority rows plus an equal-sized uniform sample of majority rows,
    drawn without replacement. The result is sorted and exactly balanced.
    """
    negatives, positives = _class_indices(labels)
    if len(negatives) == len(positives):
        return IndexSample(np.sort(np.concatenate([negatives, positives])))
    minority, majority = (positives, negatives) if len(positives) < len(negatives) else (negatives, positives)
    chosen = rng.choice(majority, size=len(minority), replace=False)
    return IndexSample(np.sort(np.concatenate([minority, chosen])))


def weighted_balanced_sample(labels, weights, rng: np.random.Generator) -> IndexSample:
    """
    Balanced sample for boosting rounds: all minority rows plus majority rows
    drawn without replacement with probability proportional to their current
    weight. Returned weights are the parent weights of the chosen rows.
    """
    weights = np.asarray(weights, dtype=float)
    negatives, positives = _class_indices(labels)
    minority, majority = (positives, negatives) if len(positives) <= len(negatives) else (negatives, positives)
    if len(minority) == len(majority):
        chosen = majority
    else:
        w = weights[majority]
        if np.count_nonzero(w) >= len(minority) and w.sum() > 0:
            chosen = rng.choice(majority, size=len(minority), replace=False, p=w / w.sum())
        else:
            chosen = rng.choice(majority, size=len(minority), replace=False)
    indices = np.sort(np.concatenate([minority, chosen]))
    return IndexSample(indices, weights[indices])


def bootstrap(n: int, rng: np.random.Generator) -> IndexSample:
    """n row ordinals drawn uniformly with replacement"""
    if n < 1:
        raise ValueError(f"bootstrap needs n >= 1, got {n}")
    return IndexSample(rng.integers(0, n, size=n))


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """
    Fold assignment for stratified K-fold CV

    Attributes:
        K: Number of folds
        assignment: Per-row fold id in [0, K)
    """
    K: int
    assignment: np.ndarray

    def test_indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == k)

    def train_indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != k)

    def splits(self) -> Iterator[Tuple[int, np.ndarray, np.ndarray]]:
        """(fold, train rows, test rows) for every fold"""
        for k in range(self.K):
            yield k, self.train_indices(k), self.test_indices(k)


def stratified_kfold(labels, K: int, rng: np.random.Generator) -> FoldPlan:
    """
    Shuffle each class, then deal its rows round-robin to folds 0..K-1

    Per-class fold counts differ by at most one; remainders land in the
    lowest-numbered folds.
    """
    if K < 2:
        raise ConfigInvalid(f"K must be >= 2, got {K}")
    labels = np.asarray(labels)
    assignment = np.full(len(labels), -1, dtype=np.int64)
    for cls in (0, 1):
        members = np.flatnonzero(labels == cls)
        if len(members) < K:
            raise TooFewClassMembers(f"class {cls} has {len(members)} rows, fewer than K={K}")
        shuffled = rng.permutation(members)
        assignment[shuffled] = np.arange(len(shuffled)) % K
    return FoldPlan(K, assignment)
