"""
Balance-aware tree ensembles

Four classifiers share one fitted representation (EnsembleModel):

- Balanced Random Forest: bootstrap, under-sample the bootstrap to balance,
  grow a tree on ceil(sqrt(q)) candidate columns per node
- Balanced Bagging: the same sampler, trees see every column
- RUSBoost: discrete AdaBoost over stumps, each round fit on a fresh
  weight-aware balanced under-sample, error and reweighting on the full set
- EasyEnsemble: several AdaBoost chains, each on its own balanced under-sample

Forest and bagging scores are the mean of member tree scores. A boosted
chain scores (sum(alpha * h) / sum(alpha) + 1) / 2 with h in {-1, +1};
EasyEnsemble averages its chains. Hard label = score >= 0.5.

Usage:
    from src.models.ensembles import fit_ensemble, predict_scores
    from src.config import ClassifierKind, Hyperparams

    model = fit_ensemble(ClassifierKind.BALANCED_RANDOM_FOREST, X, y,
                         Hyperparams.defaults(ClassifierKind.BALANCED_RANDOM_FOREST), seed=7)
    scores = predict_scores(model, X_test)
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from ..config import STUMP, ClassifierKind, Hyperparams, TreeParams
from ..errors import DimensionMismatch, SingleClassDataset
from ..log import get_logger
from ..sampling import (
    IndexSample,
    bootstrap,
    derive_seed,
    make_rng,
    random_undersample,
    weighted_balanced_sample,
)
from .tree import TreeModel, fit_tree, hard_labels, predict_scores as tree_scores

logger = get_logger(__name__)

ALPHA_CAP = 10.0
BOOTSTRAP_REDRAWS = 10
BOOSTED_KINDS = (ClassifierKind.RUSBOOST, ClassifierKind.EASY_ENSEMBLE)


@dataclass(frozen=True)
class Member:
    """
    One fitted tree of an ensemble

    Attributes:
        tree: Fitted tree (a stump for boosted kinds)
        alpha: Stage weight; 1.0 for forest and bagging members
        subset: EasyEnsemble subset the member belongs to (0 otherwise)
        sample_counts: (negatives, positives) of the rows the tree was fit on
    """
    tree: TreeModel
    alpha: float = 1.0
    subset: int = 0
    sample_counts: Tuple[int, int] = (0, 0)


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    kind: ClassifierKind
    members: Tuple[Member, ...]
    params: Hyperparams
    seed: int
    n_columns: int

    @property
    def subset_structure(self) -> List[List[int]]:
        """Member positions grouped by subset (one group unless EasyEnsemble)"""
        groups: Dict[int, List[int]] = {}
        for i, m in enumerate(self.members):
            groups.setdefault(m.subset, []).append(i)
        return [groups[k] for k in sorted(groups)]

    @property
    def importances(self) -> np.ndarray:
        return ensemble_importances(self)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "params": self.params.model_dump(mode="json"),
            "seed": self.seed,
            "n_columns": self.n_columns,
            "members": [
                {
                    "alpha": m.alpha,
                    "subset": m.subset,
                    "sample_counts": list(m.sample_counts),
                    "tree": m.tree.to_dict(),
                }
                for m in self.members
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EnsembleModel":
        members = tuple(
            Member(
                tree=TreeModel.from_dict(m["tree"]),
                alpha=float(m["alpha"]),
                subset=int(m["subset"]),
                sample_counts=tuple(int(c) for c in m["sample_counts"]),
            )
            for m in data["members"]
        )
        return cls(
            kind=ClassifierKind(data["kind"]),
            members=members,
            params=Hyperparams(**data["params"]),
            seed=int(data["seed"]),
            n_columns=int(data["n_columns"]),
        )


@dataclass
class BoostChain:
    """
    Result of one AdaBoost run

    Attributes:
        members: Accepted stages in order
        errors: Weighted full-set error of each accepted stage
        weights: Normalized sample weights after each accepted stage's update
    """
    members: List[Member] = field(default_factory=list)
    errors: List[float] = field(default_factory=list)
    weights: List[np.ndarray] = field(default_factory=list)


def _check_training_set(X, y) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(np.int8)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise DimensionMismatch(f"X has shape {X.shape} but y has {len(y)} labels")
    if len(y) < 2 or y.min() == y.max():
        raise SingleClassDataset("ensembles need at least one row of each class")
    return X, y


def _counts(y) -> Tuple[int, int]:
    positives = int(np.sum(y))
    return len(y) - positives, positives


def balanced_bootstrap(y, rng: np.random.Generator) -> IndexSample:
    """
    Bootstrap n rows, then under-sample that bootstrap to class balance

    Returns parent row ordinals (repeats possible). A bootstrap that misses a
    class entirely is redrawn.
    """
    y = np.asarray(y)
    for _ in range(BOOTSTRAP_REDRAWS):
        boot = bootstrap(len(y), rng).indices
        try:
            inner = random_undersample(y[boot], rng)
        except SingleClassDataset:
            continue
        return IndexSample(boot[inner.indices])
    raise SingleClassDataset(f"no bootstrap containing both classes after {BOOTSTRAP_REDRAWS} draws")


def _fit_bagged(kind: ClassifierKind, X, y, params: Hyperparams, seed: int) -> EnsembleModel:
    X, y = _check_training_set(X, y)
    members = []
    for d in range(params.n_estimators):
        rng = make_rng(derive_seed(seed, d))
        rows = balanced_bootstrap(y, rng).indices
        tree = fit_tree(X[rows], y[rows], params=params.tree, rng=rng)
        members.append(Member(tree, 1.0, 0, _counts(y[rows])))
    logger.debug(f"Fitted {kind.label} with {len(members)} trees")
    return EnsembleModel(kind, tuple(members), params, seed, X.shape[1])


def fit_balanced_random_forest(X, y, params: Optional[Hyperparams] = None, seed: int = 0) -> EnsembleModel:
    """Trees on under-sampled bootstraps with per-node column subsampling"""
    params = params or Hyperparams.defaults(ClassifierKind.BALANCED_RANDOM_FOREST)
    return _fit_bagged(ClassifierKind.BALANCED_RANDOM_FOREST, X, y, params, seed)


def fit_balanced_bagging(X, y, params: Optional[Hyperparams] = None, seed: int = 0) -> EnsembleModel:
    """Trees on under-sampled bootstraps, every column considered at every node"""
    params = params or Hyperparams.defaults(ClassifierKind.BALANCED_BAGGING)
    return _fit_bagged(ClassifierKind.BALANCED_BAGGING, X, y, params, seed)


def adaboost_alpha(error: float) -> float:
    """Stage weight 1/2 ln((1 - e) / e); a perfect stage (e == 0) gets ALPHA_CAP"""
    if error <= 0.0:
        return ALPHA_CAP
    return 0.5 * math.log((1.0 - error) / error)


def fit_adaboost(
    X,
    y,
    weights_init=None,
    rounds: int = 50,
    seed: int = 0,
    resample_each_round: bool = False,
    tree_params: TreeParams = STUMP,
    subset: int = 0,
) -> BoostChain:
    """
    Discrete AdaBoost with optional per-round balanced under-sampling

    Args:
        X: n x q matrix
        y: n binary labels
        weights_init: Initial sample weights (default uniform); normalized internally
        rounds: Maximum number of stages
        seed: Seed for the per-round samplers
        resample_each_round: Fit each stump on a weight-aware balanced under-sample (RUSBoost)
        tree_params: Base learner settings (a depth-1 stump by default)
        subset: Subset id stamped on the members

    Returns:
        BoostChain; never empty (a first stage with error >= 0.5 is kept with alpha 0)
    """
    X, y = _check_training_set(X, y)
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    w = np.full(len(y), 1.0 / len(y)) if weights_init is None else np.asarray(weights_init, dtype=float).copy()
    w /= w.sum()
    signed_y = np.where(y == 1, 1.0, -1.0)

    chain = BoostChain()
    for m in range(rounds):
        rng = make_rng(derive_seed(seed, m))
        attempts = 2 if resample_each_round else 1
        stage = None
        for _ in range(attempts):
            if resample_each_round:
                sample = weighted_balanced_sample(y, w, rng)
                rows = sample.indices
                stump = fit_tree(X[rows], y[rows], sample.weights / sample.weights.sum(), tree_params, rng)
            else:
                rows = np.arange(len(y))
                stump = fit_tree(X, y, w, tree_params, rng)
            signed_h = np.where(hard_labels(tree_scores(stump, X)) == 1, 1.0, -1.0)
            error = float(w[signed_h != signed_y].sum())
            stage = (stump, rows, signed_h, error)
            if error < 0.5:
                break

        stump, rows, signed_h, error = stage
        if error >= 0.5:
            if not chain.members:
                chain.members.append(Member(stump, 0.0, subset, _counts(y[rows])))
                chain.errors.append(error)
                chain.weights.append(w.copy())
            logger.debug(f"AdaBoost stopped at round {m}: error {error:.4f} >= 0.5")
            break

        alpha = adaboost_alpha(error)
        chain.members.append(Member(stump, alpha, subset, _counts(y[rows])))
        chain.errors.append(error)
        if error <= 0.0:
            chain.weights.append(w.copy())
            logger.debug(f"AdaBoost stopped at round {m}: perfect stage")
            break

        w = w * np.exp(-alpha * signed_y * signed_h)
        w /= w.sum()
        chain.weights.append(w.copy())

    return chain


def fit_rusboost(X, y, params: Optional[Hyperparams] = None, seed: int = 0) -> EnsembleModel:
    """AdaBoost with a balanced under-sample drawn at every round"""
    params = params or Hyperparams.defaults(ClassifierKind.RUSBOOST)
    X, y = _check_training_set(X, y)
    chain = fit_adaboost(X, y, rounds=params.n_estimators, seed=seed, resample_each_round=True, tree_params=params.tree)
    return EnsembleModel(ClassifierKind.RUSBOOST, tuple(chain.members), params, seed, X.shape[1])


def fit_easy_ensemble(X, y, params: Optional[Hyperparams] = None, seed: int = 0) -> EnsembleModel:
    """One AdaBoost chain per balanced under-sample of the training set"""
    params = params or Hyperparams.defaults(ClassifierKind.EASY_ENSEMBLE)
    X, y = _check_training_set(X, y)
    members: List[Member] = []
    for s in range(params.n_subsets):
        rows = random_undersample(y, make_rng(derive_seed(seed, s, 0))).indices
        chain = fit_adaboost(
            X[rows],
            y[rows],
            rounds=params.boost_rounds,
            seed=derive_seed(seed, s, 1),
            tree_params=params.tree,
            subset=s,
        )
        members.extend(chain.members)
    return EnsembleModel(ClassifierKind.EASY_ENSEMBLE, tuple(members), params, seed, X.shape[1])


_FITTERS = {
    ClassifierKind.BALANCED_RANDOM_FOREST: fit_balanced_random_forest,
    ClassifierKind.BALANCED_BAGGING: fit_balanced_bagging,
    ClassifierKind.RUSBOOST: fit_rusboost,
    ClassifierKind.EASY_ENSEMBLE: fit_easy_ensemble,
}


def fit_ensemble(kind: ClassifierKind, X, y, params: Optional[Hyperparams] = None, seed: int = 0) -> EnsembleModel:
    return _FITTERS[ClassifierKind(kind)](X, y, params, seed)


def _chain_score(members: List[Member], X) -> np.ndarray:
    alphas = np.array([m.alpha for m in members])
    total = alphas.sum()
    if total <= 0:
        return np.full(X.shape[0], 0.5)
    margin = np.zeros(X.shape[0])
    for m in members:
        signed_h = np.where(hard_labels(tree_scores(m.tree, X)) == 1, 1.0, -1.0)
        margin += m.alpha * signed_h
    return (margin / total + 1.0) / 2.0


def predict_scores(model: EnsembleModel, X) -> np.ndarray:
    """Ensemble score in [0, 1] for every row of X"""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_columns:
        raise DimensionMismatch(f"matrix has shape {X.shape}, model expects {model.n_columns} columns")
    if model.kind in BOOSTED_KINDS:
        chains = [[model.members[i] for i in group] for group in model.subset_structure]
        return np.mean([_chain_score(chain, X) for chain in chains], axis=0)
    return np.mean([tree_scores(m.tree, X) for m in model.members], axis=0)


def predict_score(model: EnsembleModel, x) -> float:
    """Score of a single row"""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_columns,):
        raise DimensionMismatch(f"row has {x.shape} cells, model expects {model.n_columns}")
    return float(predict_scores(model, x.reshape(1, -1))[0])


def predict_labels(model: EnsembleModel, X) -> np.ndarray:
    return hard_labels(predict_scores(model, X))


def ensemble_importances(model: EnsembleModel) -> np.ndarray:
    """Alpha-weighted mean of member importances (uniform for forest/bagging), renormalized"""
    if model.kind in BOOSTED_KINDS:
        weights = np.array([m.alpha for m in model.members], dtype=float)
        if weights.sum() <= 0:
            weights = np.ones(len(model.members))
    else:
        weights = np.ones(len(model.members))
    stacked = np.array([m.tree.importances for m in model.members])
    mean = weights @ stacked / weights.sum()
    s = mean.sum()
    return mean / s if s > 0 else mean


def save_model(model: EnsembleModel, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model.to_dict(), f, indent=1)


def load_model(path: Union[str, Path]) -> EnsembleModel:
    with open(path, "r", encoding="utf-8") as f:
        return EnsembleModel.from_dict(json.load(f))
