"""
Stratified K-fold cross-validation driver

For every fold the driver builds an imputation plan (from the training rows
only, or once from the whole dataset in paper mode), encodes the imputed
dataset, fits each configured classifier on the training rows and scores the
held-out rows. Fold results are reduced by unweighted means over folds; a
pooled ROC (every row scored by the model that held it out) is reported
alongside.

Seeds:
    derive_seed(seed, 0)                  -> fold assignment
    derive_seed(seed, 100, fold)          -> imputation subsample of that fold
    derive_seed(seed, kind.code, fold)    -> classifier fit on that fold

Usage:
    from src.config import ExperimentConfig
    from src.evaluation import run_experiment, write_report

    report = run_experiment(ExperimentConfig(seed=7), ds)
    write_report(report, "balens_out")
"""

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .config import ClassifierKind, ExperimentConfig, Hyperparams
from .data_model import Dataset
from .errors import DataError, EmptyReport
from .log import get_logger
from .metrics import (
    ConfusionMatrix,
    MetricsRecord,
    RocCurve,
    average_confusions,
    compute_metrics,
    confusion,
    mean_metrics,
    roc_curve,
    write_roc_csv,
)
from .models.ensembles import EnsembleModel, fit_ensemble, predict_scores, save_model
from .models.tree import hard_labels
from .preprocess import EncodedMatrix, ImputationPlan, apply_imputation, build_imputation_plan, one_hot_encode
from .sampling import FoldPlan, derive_seed, make_rng, stratified_kfold

logger = get_logger(__name__)

FOLD_KEY = 0
IMPUTE_KEY = 100
UNASSIGNED_DOMAIN = "unassigned"


@dataclass
class FoldResult:
    """
    One classifier evaluated on one held-out fold

    Attributes:
        kind: Classifier
        fold: Fold id (0-based)
        metrics: Figures of merit at the 0.5 score threshold
        confusion: Raw counts on the test rows
        roc: ROC curve of the test-row scores
        importances: Source feature name -> normalized importance
        test_indices: Dataset rows scored in this fold
        scores: Score of each test row, parallel to test_indices
        model: The fitted model, kept only when requested
    """
    kind: ClassifierKind
    fold: int
    metrics: MetricsRecord
    confusion: ConfusionMatrix
    roc: RocCurve
    importances: Dict[str, float]
    test_indices: np.ndarray
    scores: np.ndarray
    model: Optional[EnsembleModel] = None


@dataclass
class ClassifierReport:
    kind: ClassifierKind
    folds: List[FoldResult]

    @property
    def fold_metrics(self) -> List[MetricsRecord]:
        return [f.metrics for f in self.folds]

    @property
    def mean_metrics(self) -> MetricsRecord:
        return mean_metrics(self.fold_metrics)

    @property
    def confusion_avg(self) -> np.ndarray:
        return average_confusions([f.confusion for f in self.folds])

    @property
    def roc_curves(self) -> List[RocCurve]:
        return [f.roc for f in self.folds]

    @property
    def mean_auc(self) -> float:
        return float(np.mean([f.roc.auc for f in self.folds]))

    def pooled_roc(self, labels: np.ndarray) -> RocCurve:
        """ROC over all rows, each scored by the model of the fold that held it out"""
        rows = np.concatenate([f.test_indices for f in self.folds])
        scores = np.concatenate([f.scores for f in self.folds])
        order = np.argsort(rows, kind="mergesort")
        return roc_curve(labels[rows[order]], scores[order])

    @property
    def importances(self) -> Dict[str, float]:
        """Fold-mean source-feature importances; a feature absent from a fold counts 0 there"""
        names = sorted({name for f in self.folds for name in f.importances})
        k = len(self.folds)
        return {name: sum(f.importances.get(name, 0.0) for f in self.folds) / k for name in names}


@dataclass
class EvalReport:
    """
    Attributes:
        config: The experiment configuration
        labels: Labels of the evaluated dataset
        fold_plan: Stratified fold assignment
        classifiers: Per-classifier results, in config order
        plans: Imputation plan per fold (a single shared plan in paper mode)
        started_at, finished_at: ISO-8601 UTC timestamps
    """
    config: ExperimentConfig
    labels: np.ndarray
    fold_plan: FoldPlan
    classifiers: Dict[ClassifierKind, ClassifierReport]
    plans: List[ImputationPlan]
    started_at: str = ""
    finished_at: str = ""
    feature_names: List[str] = field(default_factory=list)

    def get(self, kind: ClassifierKind) -> ClassifierReport:
        return self.classifiers[ClassifierKind(kind)]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def prepare_fold(
    ds: Dataset,
    train_indices: Sequence[int],
    threshold: float,
    seed: int,
) -> Tuple[EncodedMatrix, ImputationPlan]:
    """
    Learn the missingness filter and fill values from the training rows only,
    then impute and encode the whole dataset with that plan

    Every fold's matrix has one column per category seen anywhere in the
    dataset, so train and test rows share the same columns.
    """
    plan = build_imputation_plan(ds.take(train_indices), seed, threshold)
    encoded = one_hot_encode(apply_imputation(ds, plan))
    return encoded, plan


def prepare_global(ds: Dataset, threshold: float, seed: int) -> Tuple[EncodedMatrix, ImputationPlan]:
    """Paper mode: one plan from the full dataset, applied before cross-validation"""
    plan = build_imputation_plan(ds, seed, threshold)
    return one_hot_encode(apply_imputation(ds, plan)), plan


def source_importances(encoded: EncodedMatrix, column_scores: np.ndarray) -> Dict[str, float]:
    """Sum indicator-column importances back onto their source feature"""
    return {name: float(column_scores[cols].sum()) for name, cols in encoded.groups().items()}


def _evaluate_fold(
    kind: ClassifierKind,
    fold: int,
    encoded: EncodedMatrix,
    train_indices: np.ndarray,
    test_indices: np.ndarray,
    params: Hyperparams,
    seed: int,
    keep_model: bool,
) -> FoldResult:
    X_train, y_train = encoded.rows(train_indices)
    X_test, y_test = encoded.rows(test_indices)
    model = fit_ensemble(kind, X_train, y_train, params, seed)
    scores = predict_scores(model, X_test)
    cm = confusion(y_test, hard_labels(scores))
    result = FoldResult(
        kind=kind,
        fold=fold,
        metrics=compute_metrics(cm),
        confusion=cm,
        roc=roc_curve(y_test, scores),
        importances=source_importances(encoded, model.importances),
        test_indices=np.asarray(test_indices),
        scores=scores,
        model=model if keep_model else None,
    )
    logger.info(
        f"{kind.label} fold {fold + 1}: balanced accuracy {result.metrics.balanced_accuracy:.3f}, AUC {result.roc.auc:.3f}"
    )
    return result


def run_experiment(config: ExperimentConfig, ds: Dataset, keep_models: bool = False) -> EvalReport:
    """
    Cross-validate every configured classifier on `ds`

    Args:
        config: Folds, seed, imputation mode, classifiers and their hyperparameters
        ds: Dataset (Missing cells allowed)
        keep_models: Retain the fitted models of the last fold

    Returns:
        EvalReport; a pure function of (config, dataset) apart from its timestamps
    """
    started = _now()
    negatives, positives = ds.class_counts()
    if negatives == 0 or positives == 0:
        raise DataError("cross-validation needs both classes present")
    fold_plan = stratified_kfold(ds.labels, config.K, make_rng(derive_seed(config.seed, FOLD_KEY)))
    logger.info(
        f"Running {config.K}-fold CV on {ds.n_rows} rows ({positives} positive) for "
        f"{', '.join(k.label for k in config.classifiers)}"
    )

    if config.paper_mode:
        shared = prepare_global(ds, config.missingness_threshold, derive_seed(config.seed, IMPUTE_KEY))
        prepared = [shared] * config.K
        plans = [shared[1]]
    else:
        prepared = [
            prepare_fold(ds, train, config.missingness_threshold, derive_seed(config.seed, IMPUTE_KEY, k))
            for k, train, _ in fold_plan.splits()
        ]
        plans = [plan for _, plan in prepared]

    tasks = []
    for kind in config.classifiers:
        params = config.params_for(kind)
        for k, train, test in fold_plan.splits():
            keep = keep_models and k == config.K - 1
            tasks.append(
                delayed(_evaluate_fold)(
                    kind, k, prepared[k][0], train, test, params, derive_seed(config.seed, kind.code, k), keep
                )
            )
    results = Parallel(n_jobs=config.threads, prefer="threads")(tasks)

    # Parallel returns results in task order, so the reduction never depends on scheduling
    classifiers: Dict[ClassifierKind, ClassifierReport] = {}
    for result in results:
        classifiers.setdefault(result.kind, ClassifierReport(result.kind, [])).folds.append(result)

    return EvalReport(
        config=config,
        labels=ds.labels.copy(),
        fold_plan=fold_plan,
        classifiers=classifiers,
        plans=plans,
        started_at=started,
        finished_at=_now(),
        feature_names=ds.feature_names,
    )


def _ranked(scores: Mapping[str, float]) -> List[Tuple[str, float]]:
    return sorted(scores.items(), key=lambda item: (-item[1], item[0]))


def rank_importances(
    report: EvalReport,
    top_k: int = 20,
    classifier: Optional[ClassifierKind] = None,
) -> List[Tuple[str, float]]:
    """
    Source features by fold-averaged importance, descending, ties by name

    With no classifier given, the per-classifier averages are averaged again.
    """
    if not report.classifiers or not any(c.folds for c in report.classifiers.values()):
        raise EmptyReport("report holds no fold results")
    if classifier is not None:
        scores = report.get(classifier).importances
    else:
        per_kind = [c.importances for c in report.classifiers.values()]
        names = sorted({name for imp in per_kind for name in imp})
        scores = {name: sum(imp.get(name, 0.0) for imp in per_kind) / len(per_kind) for name in names}
    return _ranked(scores)[:top_k]


def load_domains(path: Union[str, Path]) -> Dict[str, str]:
    """Read a `feature,domain` CSV into a feature -> domain map"""
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = {"feature", "domain"} - set(frame.columns)
    if missing:
        raise DataError(f"domain file lacks column(s): {', '.join(sorted(missing))}")
    return dict(zip(frame["feature"].str.strip(), frame["domain"].str.strip()))


def domain_importances(scores: Mapping[str, float], domains: Mapping[str, str]) -> List[Tuple[str, float]]:
    """Sum source-feature scores per domain; unmapped features land in 'unassigned'"""
    totals: Dict[str, float] = {}
    for name, score in scores.items():
        domain = domains.get(name, UNASSIGNED_DOMAIN)
        totals[domain] = totals.get(domain, 0.0) + score
    return _ranked(totals)


def metrics_document(report: EvalReport) -> Dict[str, Any]:
    """Everything in metrics.json; no timestamps so equal runs give equal bytes"""
    doc: Dict[str, Any] = {
        "aggregation": "fold_mean",
        "K": report.config.K,
        "seed": report.config.seed,
        "paper_mode": report.config.paper_mode,
        "classifiers": {},
    }
    for kind, result in report.classifiers.items():
        mean = result.mean_metrics.to_dict()
        mean["auc"] = result.mean_auc
        doc["classifiers"][kind.value] = {
            "label": kind.label,
            "folds": [
                {
                    "fold": f.fold + 1,
                    **f.metrics.to_dict(),
                    "auc": f.roc.auc,
                    "confusion": {"tp": f.confusion.tp, "fp": f.confusion.fp, "fn": f.confusion.fn, "tn": f.confusion.tn},
                }
                for f in result.folds
            ],
            "mean": mean,
            "pooled_auc": result.pooled_roc(report.labels).auc,
            "confusion_avg": result.confusion_avg.tolist(),
        }
    return doc


def write_report(
    report: EvalReport,
    out_dir: Union[str, Path],
    domains: Optional[Mapping[str, str]] = None,
    save_models: bool = False,
) -> List[Path]:
    """
    Write the evaluation artifacts into out_dir

    Files: metrics.json, confusion_avg.csv, roc_fold{k}.csv (k = 1..K),
    roc_pooled.csv, importance.csv, importance_top.csv (top_k per classifier
    and across classifiers), config_echo.json, plus
    domain_importance.csv when domains are given and models/ when requested.

    Returns:
        Paths written
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    path = out_dir / "metrics.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(metrics_document(report), f, indent=2)
        f.write("\n")
    written.append(path)

    path = out_dir / "confusion_avg.csv"
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["classifier", "actual", "predicted_negative", "predicted_positive"])
        for kind, result in report.classifiers.items():
            avg = result.confusion_avg
            writer.writerow([kind.value, "negative", repr(float(avg[0, 0])), repr(float(avg[0, 1]))])
            writer.writerow([kind.value, "positive", repr(float(avg[1, 0])), repr(float(avg[1, 1]))])
    written.append(path)

    for k in range(report.config.K):
        path = out_dir / f"roc_fold{k + 1}.csv"
        write_roc_csv({kind.value: result.folds[k].roc for kind, result in report.classifiers.items()}, path)
        written.append(path)

    path = out_dir / "roc_pooled.csv"
    write_roc_csv({kind.value: result.pooled_roc(report.labels) for kind, result in report.classifiers.items()}, path)
    written.append(path)

    path = out_dir / "importance.csv"
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["classifier", "rank", "feature", "score"])
        for kind, result in report.classifiers.items():
            for rank, (name, score) in enumerate(_ranked(result.importances), 1):
                writer.writerow([kind.value, rank, name, repr(score)])
    written.append(path)

    top_k = report.config.top_k
    path = out_dir / "importance_top.csv"
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["classifier", "rank", "feature", "score"])
        for kind in report.classifiers:
            for rank, (name, score) in enumerate(rank_importances(report, top_k, kind), 1):
                writer.writerow([kind.value, rank, name, repr(score)])
        for rank, (name, score) in enumerate(rank_importances(report, top_k), 1):
            writer.writerow(["all", rank, name, repr(score)])
    written.append(path)

    if domains is not None:
        path = out_dir / "domain_importance.csv"
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["classifier", "rank", "domain", "score"])
            for kind, result in report.classifiers.items():
                for rank, (domain, score) in enumerate(domain_importances(result.importances, domains), 1):
                    writer.writerow([kind.value, rank, domain, repr(score)])
        written.append(path)

    path = out_dir / "config_echo.json"
    echo = report.config.echo()
    echo["started_at"] = report.started_at
    echo["finished_at"] = report.finished_at
    echo["n_rows"] = int(len(report.labels))
    echo["n_positive"] = int(report.labels.sum())
    echo["features"] = report.feature_names
    echo["imputation"] = {
        "mode": "global" if report.config.paper_mode else "per_fold",
        "plans": [plan.to_dict() for plan in report.plans],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(echo, f, indent=2, ensure_ascii=False)
        f.write("\n")
    written.append(path)

    if save_models:
        models_dir = out_dir / "models"
        models_dir.mkdir(exist_ok=True)
        for kind, result in report.classifiers.items():
            last = result.folds[-1]
            if last.model is None:
                logger.warning(f"No fitted model kept for {kind.label}; rerun with keep_models=True")
                continue
            path = models_dir / f"{kind.value}_fold{last.fold + 1}.json"
            save_model(last.model, path)
            written.append(path)

    logger.info(f"Wrote {len(written)} file(s) to {out_dir}")
    return written
