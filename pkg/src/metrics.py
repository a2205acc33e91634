"""
Figures of merit for binary classifiers

Confusion matrices, accuracy / precision / recall / specificity / F1 /
balanced accuracy (macro and positive-class variants), ROC curves with
trapezoidal AUC, a pair-counting AUC oracle, and row-normalized averaging
of confusion matrices across folds.

Averaged confusion matrices use the layout
    [[TN, FP],
     [FN, TP]]
(rows = actual negative/positive, columns = predicted negative/positive),
each row normalized to sum 1 before averaging.
"""

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from .errors import EmptyConfusion, EmptyInput, EmptyList, LengthMismatch, SingleClassDataset, ZeroRow
from .log import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: float
    fp: float
    fn: float
    tn: float

    @property
    def total(self) -> float:
        return self.tp + self.fp + self.fn + self.tn

    def as_array(self) -> np.ndarray:
        """[[TN, FP], [FN, TP]]"""
        return np.array([[self.tn, self.fp], [self.fn, self.tp]], dtype=float)

    def normalized(self) -> np.ndarray:
        """Row-normalized matrix: each actual class row sums to 1"""
        arr = self.as_array()
        rows = arr.sum(axis=1, keepdims=True)
        if (rows == 0).any():
            raise ZeroRow("a class has no rows in this confusion matrix")
        return arr / rows


@dataclass(frozen=True)
class MetricsRecord:
    accuracy: float
    balanced_accuracy: float
    recall: float
    specificity: float
    precision_macro: float
    f1_macro: float
    precision_positive: float
    f1_positive: float
    warnings: List[str] = field(default_factory=list)

    FIELDS = (
        "accuracy",
        "balanced_accuracy",
        "recall",
        "specificity",
        "precision_macro",
        "f1_macro",
        "precision_positive",
        "f1_positive",
    )

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def confusion(y_true: Sequence[int], y_pred: Sequence[int]) -> ConfusionMatrix:
    """Four-way count of predictions against truth"""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"{len(y_true)} labels vs {len(y_pred)} predictions")
    if len(y_true) == 0:
        raise EmptyInput("confusion needs at least one prediction")
    t = y_true == 1
    p = y_pred == 1
    return ConfusionMatrix(
        tp=int(np.sum(t & p)),
        fp=int(np.sum(~t & p)),
        fn=int(np.sum(t & ~p)),
        tn=int(np.sum(~t & ~p)),
    )


def _ratio(num: float, den: float, name: str, warnings: List[str]) -> float:
    if den == 0:
        warnings.append(f"{name}: zero denominator, reported as 0")
        return 0.0
    return num / den


def _f1(precision: float, recall: float, name: str, warnings: List[str]) -> float:
    if precision + recall == 0:
        warnings.append(f"{name}: precision and recall both 0, reported as 0")
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def compute_metrics(cm: ConfusionMatrix) -> MetricsRecord:
    """
    Evaluate every figure of merit on one confusion matrix

    Zero denominators evaluate to 0 and add a note to `warnings`.
    Macro precision and F1 are unweighted means over the two classes.
    """
    if cm.total <= 0:
        raise EmptyConfusion("confusion matrix has no predictions")
    warnings: List[str] = []
    recall = _ratio(cm.tp, cm.tp + cm.fn, "recall", warnings)
    specificity = _ratio(cm.tn, cm.tn + cm.fp, "specificity", warnings)
    precision_pos = _ratio(cm.tp, cm.tp + cm.fp, "precision_positive", warnings)
    precision_neg = _ratio(cm.tn, cm.tn + cm.fn, "precision_negative", warnings)
    f1_pos = _f1(precision_pos, recall, "f1_positive", warnings)
    f1_neg = _f1(precision_neg, specificity, "f1_negative", warnings)
    if warnings:
        logger.warning(f"Zero denominators, metrics set to 0: {warnings}")

    return MetricsRecord(
        accuracy=(cm.tp + cm.tn) / cm.total,
        balanced_accuracy=(recall + specificity) / 2.0,
        recall=recall,
        specificity=specificity,
        precision_macro=(precision_pos + precision_neg) / 2.0,
        f1_macro=(f1_pos + f1_neg) / 2.0,
        precision_positive=precision_pos,
        f1_positive=f1_pos,
        warnings=warnings,
    )


def mean_metrics(records: Sequence[MetricsRecord]) -> MetricsRecord:
    """Field-wise unweighted mean over folds"""
    if not records:
        raise EmptyList("no metric records to average")
    values = {name: float(np.mean([getattr(r, name) for r in records])) for name in MetricsRecord.FIELDS}
    notes = sorted({w for r in records for w in r.warnings})
    return MetricsRecord(**values, warnings=notes)


@dataclass(frozen=True)
class RocCurve:
    """
    Attributes:
        fpr, tpr: Curve coordinates from (0, 0) to (1, 1)
        thresholds: Score threshold of each point (inf for the origin)
        auc: Trapezoidal area under the curve
    """
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self) -> List[tuple]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist(), self.thresholds.tolist()))


def _check_scored(y_true, scores):
    y_true = np.asarray(y_true).astype(int)
    scores = np.asarray(scores, dtype=float)
    if len(y_true) != len(scores):
        raise LengthMismatch(f"{len(y_true)} labels vs {len(scores)} scores")
    n_pos = int(np.sum(y_true == 1))
    n_neg = len(y_true) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassDataset("ROC analysis needs both classes")
    return y_true, scores, n_pos, n_neg


def trapezoid_area(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


def roc_curve(y_true: Sequence[int], scores: Sequence[float]) -> RocCurve:
    """
    Sweep distinct scores from high to low; tied scores form a single step

    A row is predicted positive at threshold t when score >= t.
    """
    y_true, scores, n_pos, n_neg = _check_scored(y_true, scores)
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    y = y_true[order]

    # Last position of each run of equal scores
    ends = np.append(np.flatnonzero(np.diff(s) != 0), len(s) - 1)
    tp = np.cumsum(y == 1)[ends]
    fp = np.cumsum(y == 0)[ends]

    fpr = np.concatenate([[0.0], fp / n_neg])
    tpr = np.concatenate([[0.0], tp / n_pos])
    thresholds = np.concatenate([[math.inf], s[ends]])
    return RocCurve(fpr, tpr, thresholds, trapezoid_area(fpr, tpr))


def auc_oracle(y_true: Sequence[int], scores: Sequence[float]) -> float:
    """Mann-Whitney statistic by enumerating (positive, negative) pairs; ties count one half"""
    y_true, scores, n_pos, n_neg = _check_scored(y_true, scores)
    pos = scores[y_true == 1][:, None]
    neg = scores[y_true == 0][None, :]
    wins = np.sum(pos > neg) + 0.5 * np.sum(pos == neg)
    return float(wins / (n_pos * n_neg))


def average_confusions(cms: Sequence[ConfusionMatrix]) -> np.ndarray:
    """Normalize each matrix by true-class row, then average element-wise"""
    if not cms:
        raise EmptyList("no confusion matrices to average")
    return np.mean([cm.normalized() for cm in cms], axis=0)


def write_roc_csv(curves: Dict[str, RocCurve], path: Union[str, Path]) -> None:
    """Rows of (classifier, threshold, fpr, tpr)"""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["classifier", "threshold", "fpr", "tpr"])
        for name, curve in curves.items():
            for fpr, tpr, threshold in curve.points:
                writer.writerow([name, repr(threshold), repr(fpr), repr(tpr)])


def read_roc_csv(path: Union[str, Path]) -> Dict[str, RocCurve]:
    frame = pd.read_csv(path, float_precision="round_trip")
    out: Dict[str, RocCurve] = {}
    for name, group in frame.groupby("classifier", sort=False):
        fpr = group["fpr"].to_numpy(dtype=float)
        tpr = group["tpr"].to_numpy(dtype=float)
        out[str(name)] = RocCurve(fpr, tpr, group["threshold"].to_numpy(dtype=float), trapezoid_area(fpr, tpr))
    return out
