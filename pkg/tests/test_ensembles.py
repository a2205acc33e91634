"""
Tests for the four balanced ensembles and AdaBoost

Run with: python -m pytest tests/test_ensembles.py -v
"""

import math

import numpy as np
import pytest

from src.config import STUMP, ClassifierKind, Hyperparams, TreeParams
from src.errors import DimensionMismatch, SingleClassDataset
from src.models.ensembles import (
    EnsembleModel,
    Member,
    adaboost_alpha,
    balanced_bootstrap,
    ensemble_importances,
    fit_adaboost,
    fit_balanced_bagging,
    fit_balanced_random_forest,
    fit_easy_ensemble,
    fit_ensemble,
    fit_rusboost,
    load_model,
    predict_labels,
    predict_score,
    predict_scores,
    save_model,
)
from src.models.tree import Leaf, TreeModel, hard_labels, predict_scores as tree_scores
from src.sampling import make_rng


def _leaf_tree(value: float, n_columns: int = 1) -> TreeModel:
    return TreeModel(Leaf((1.0 - value, value), value, 1), TreeParams(), n_columns)


def _random_problem(seed: int, n: int = 120, p: int = 4, rate: float = 0.25):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < rate).astype(np.int8)
    y[0], y[1] = 1, 0
    X = rng.standard_normal((n, p))
    X[y == 1, 0] += 1.0
    return X, y


def test_alpha_values():
    assert adaboost_alpha(0.25) == pytest.approx(0.5 * math.log(3.0), abs=1e-12)
    assert adaboost_alpha(0.0) == 10.0
    # Only a perfect stage is capped
    assert adaboost_alpha(1e-12) == pytest.approx(0.5 * math.log((1.0 - 1e-12) / 1e-12), rel=1e-12)
    assert adaboost_alpha(1e-12) > 10.0


def test_tiny_error_stage_keeps_identity():
    """A stage with error 1e-10 still leaves its misclassified rows holding half the weight"""
    X = np.arange(10.0).reshape(-1, 1)
    y = (X[:, 0] >= 5).astype(np.int8)
    y[0] = 1
    w = np.ones(10)
    w[0] = 1e-10
    chain = fit_adaboost(X, y, weights_init=w, rounds=1)

    error = chain.errors[0]
    assert 0.0 < error < 1e-9
    assert chain.members[0].alpha > 10.0
    assert chain.weights[0][0] == pytest.approx(0.5, abs=1e-9)


def test_balanced_bootstrap_is_balanced():
    """Every per-member sample has exactly equal class counts"""
    rng = np.random.default_rng(0)
    for seed in range(100):
        y = (rng.random(80) < 0.2).astype(int)
        y[:3] = 1
        rows = balanced_bootstrap(y, make_rng(seed)).indices
        assert y[rows].sum() * 2 == len(rows)


def test_forest_members_fit_on_balanced_samples(gaussian_data):
    X, y = gaussian_data
    for fit in (fit_balanced_random_forest, fit_balanced_bagging):
        model = fit(X, y, Hyperparams(n_estimators=15), seed=4)
        assert len(model.members) == 15
        for member in model.members:
            negatives, positives = member.sample_counts
            assert negatives == positives > 0


def test_rusboost_rounds_fit_on_balanced_samples(gaussian_data):
    X, y = gaussian_data
    model = fit_rusboost(X, y, Hyperparams(n_estimators=20, tree=STUMP), seed=2)
    assert 1 <= len(model.members) <= 20
    for member in model.members:
        negatives, positives = member.sample_counts
        assert negatives == positives == int(y.sum())


def test_single_tree_forest_reproduces_its_tree(gaussian_data):
    """With one member the forest score is that tree's score"""
    X, y = gaussian_data
    model = fit_balanced_random_forest(X, y, Hyperparams(n_estimators=1, tree=TreeParams(features_per_split="sqrt")), seed=9)
    assert np.array_equal(predict_scores(model, X), tree_scores(model.members[0].tree, X))


def test_forest_score_is_mean_of_member_scores(gaussian_data):
    X, y = gaussian_data
    model = fit_balanced_random_forest(X, y, Hyperparams(n_estimators=12, tree=TreeParams(features_per_split="sqrt")), seed=1)
    members = np.mean([tree_scores(m.tree, X) for m in model.members], axis=0)
    assert np.allclose(predict_scores(model, X), members, atol=1e-12, rtol=0)


def test_mean_score_agrees_with_majority_vote(gaussian_data):
    """Thresholded mean equals the member majority whenever the vote is decisive"""
    X, y = gaussian_data
    model = fit_balanced_bagging(X, y, Hyperparams(n_estimators=9), seed=5)
    member_scores = np.array([tree_scores(m.tree, X) for m in model.members])
    votes = hard_labels(member_scores).sum(axis=0)
    mean_labels = predict_labels(model, X)
    decisive = ~(member_scores == 0.5).any(axis=0) & (votes * 2 != len(model.members))
    # Fully grown trees have pure leaves, so every member score is 0 or 1
    assert decisive.all()
    assert np.array_equal(mean_labels[decisive], (votes[decisive] * 2 > len(model.members)).astype(np.int8))


def test_bagging_with_sqrt_features_matches_forest(gaussian_data):
    """The two bagged fitters differ only in their default tree settings"""
    X, y = gaussian_data
    params = Hyperparams(n_estimators=5, tree=TreeParams(features_per_split="sqrt"))
    forest = fit_balanced_random_forest(X, y, params, seed=3)
    bagging = fit_balanced_bagging(X, y, params, seed=3)
    assert [m.tree.to_dict() for m in forest.members] == [m.tree.to_dict() for m in bagging.members]


def test_adaboost_post_round_identity():
    """The stump just fit has weighted error 1/2 under the weights it produced"""
    for seed in range(50):
        X, y = _random_problem(seed)
        signed_y = np.where(y == 1, 1.0, -1.0)
        for resample in (False, True):
            chain = fit_adaboost(X, y, rounds=8, seed=seed, resample_each_round=resample)
            for member, error, weights in zip(chain.members, chain.errors, chain.weights):
                if error <= 0.0 or member.alpha == 0.0:
                    continue
                signed_h = np.where(hard_labels(tree_scores(member.tree, X)) == 1, 1.0, -1.0)
                assert weights[signed_h != signed_y].sum() == pytest.approx(0.5, abs=1e-9)


def test_adaboost_stops_on_perfect_stage():
    """A separable column gives error 0, capped alpha and a one-stage chain"""
    X = np.column_stack([np.zeros(10), np.arange(10.0)])
    y = (np.arange(10) >= 5).astype(int)
    chain = fit_adaboost(X, y, rounds=10)
    assert len(chain.members) == 1
    assert chain.errors == [0.0]
    assert chain.members[0].alpha == 10.0


def test_adaboost_never_returns_an_empty_chain():
    """Labels no stump can beat keep one zero-weight stage that scores 1/2"""
    X = np.zeros((6, 1))
    y = np.array([0, 1, 0, 1, 0, 1])
    chain = fit_adaboost(X, y, rounds=5)
    assert len(chain.members) == 1
    assert chain.members[0].alpha == 0.0

    model = EnsembleModel(ClassifierKind.RUSBOOST, tuple(chain.members), Hyperparams(), 0, 1)
    assert predict_scores(model, X).tolist() == [0.5] * 6


def test_rusboost_importance_on_single_informative_column():
    """All stumps split the separating column, so it takes all the importance"""
    rng = np.random.default_rng(8)
    y = np.array([1] * 10 + [0] * 40)
    X = rng.standard_normal((50, 4))
    X[:, 3] = np.where(y == 1, 5.0, -5.0) + rng.uniform(-1, 1, 50)
    model = fit_rusboost(X, y, seed=1)
    assert np.allclose(ensemble_importances(model), [0.0, 0.0, 0.0, 1.0])


def test_easy_ensemble_structure(gaussian_data):
    """One chain of stumps per subset, at most boost_rounds long"""
    X, y = gaussian_data
    model = fit_easy_ensemble(X, y, Hyperparams(n_subsets=4, boost_rounds=5, tree=STUMP), seed=6)
    groups = model.subset_structure
    assert len(groups) == 4
    assert all(1 <= len(g) <= 5 for g in groups)
    for member in model.members:
        negatives, positives = member.sample_counts
        assert negatives == positives == int(y.sum())


def test_default_hyperparams():
    assert Hyperparams.defaults(ClassifierKind.BALANCED_RANDOM_FOREST).n_estimators == 100
    assert Hyperparams.defaults(ClassifierKind.BALANCED_RANDOM_FOREST).tree.features_per_split == "sqrt"
    assert Hyperparams.defaults(ClassifierKind.BALANCED_BAGGING).n_estimators == 10
    assert Hyperparams.defaults(ClassifierKind.RUSBOOST).n_estimators == 50
    ee = Hyperparams.defaults(ClassifierKind.EASY_ENSEMBLE)
    assert (ee.n_subsets, ee.boost_rounds, ee.tree.max_depth) == (10, 10, 1)


def test_score_examples():
    unanimous = EnsembleModel(
        ClassifierKind.BALANCED_BAGGING, tuple(Member(_leaf_tree(1.0)) for _ in range(3)), Hyperparams(), 0, 1
    )
    assert predict_score(unanimous, [0.0]) == 1.0

    split_vote = EnsembleModel(
        ClassifierKind.BALANCED_BAGGING,
        (Member(_leaf_tree(0.0)), Member(_leaf_tree(0.0)), Member(_leaf_tree(1.0))),
        Hyperparams(),
        0,
        1,
    )
    assert predict_score(split_vote, [0.0]) == pytest.approx(1 / 3)
    assert predict_labels(split_vote, np.zeros((1, 1))).tolist() == [0]

    boosted = EnsembleModel(ClassifierKind.RUSBOOST, (Member(_leaf_tree(1.0), alpha=0.7),), Hyperparams(), 0, 1)
    assert predict_score(boosted, [0.0]) == 1.0


def test_tied_score_goes_positive():
    tie = EnsembleModel(
        ClassifierKind.BALANCED_BAGGING, (Member(_leaf_tree(0.0)), Member(_leaf_tree(1.0))), Hyperparams(), 0, 1
    )
    assert predict_labels(tie, np.zeros((1, 1))).tolist() == [1]


def test_importances_of_identical_trees_equal_the_tree():
    X = np.column_stack([np.arange(10.0), np.zeros(10)])
    y = (np.arange(10) >= 5).astype(int)
    model = fit_balanced_bagging(X, y, Hyperparams(n_estimators=4), seed=0)
    assert np.allclose(ensemble_importances(model), [1.0, 0.0])


@pytest.mark.parametrize("kind", list(ClassifierKind))
def test_fit_is_deterministic_and_serializable(kind, gaussian_data, tmp_path):
    """Same inputs and seed give the same model, bit for bit through JSON"""
    X, y = gaussian_data
    params = Hyperparams(n_estimators=6, n_subsets=3, boost_rounds=4, tree=Hyperparams.defaults(kind).tree)
    a = fit_ensemble(kind, X, y, params, seed=11)
    b = fit_ensemble(kind, X, y, params, seed=11)
    assert a.to_dict() == b.to_dict()

    path = tmp_path / f"{kind.value}.json"
    save_model(a, path)
    loaded = load_model(path)
    assert loaded.to_dict() == a.to_dict()
    assert np.array_equal(predict_scores(loaded, X), predict_scores(a, X))
    assert ensemble_importances(a).sum() == pytest.approx(1.0, abs=1e-9)


def test_ensemble_errors(gaussian_data):
    X, y = gaussian_data
    with pytest.raises(SingleClassDataset):
        fit_balanced_random_forest(X, np.zeros(len(y)))
    model = fit_balanced_bagging(X, y, Hyperparams(n_estimators=2), seed=0)
    with pytest.raises(DimensionMismatch):
        predict_scores(model, X[:, :2])
