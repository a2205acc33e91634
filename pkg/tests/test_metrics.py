"""
Tests for confusion matrices, figures of merit and ROC/AUC

Run with: python -m pytest tests/test_metrics.py -v
"""

import logging
import math

import numpy as np
import pytest

from src.errors import EmptyConfusion, EmptyInput, EmptyList, LengthMismatch, SingleClassDataset, ZeroRow
from src.metrics import (
    ConfusionMatrix,
    MetricsRecord,
    auc_oracle,
    average_confusions,
    compute_metrics,
    confusion,
    mean_metrics,
    read_roc_csv,
    roc_curve,
    write_roc_csv,
)


def test_confusion_counts():
    assert confusion([1, 0, 1], [1, 0, 1]) == ConfusionMatrix(tp=2, fp=0, fn=0, tn=1)
    cm = confusion([1, 1, 1, 1, 1, 0, 0, 0, 0, 0], [1, 1, 1, 0, 0, 1, 0, 0, 0, 0])
    assert (cm.tp, cm.fn, cm.fp, cm.tn) == (3, 2, 1, 4)
    assert confusion([1, 1, 1], [0, 0, 0]) == ConfusionMatrix(tp=0, fp=0, fn=3, tn=0)


def test_confusion_errors():
    with pytest.raises(LengthMismatch):
        confusion([1, 0], [1])
    with pytest.raises(EmptyInput):
        confusion([], [])


def test_hand_built_matrix():
    """tp=3, fn=2, fp=1, tn=4 evaluated by hand"""
    m = compute_metrics(ConfusionMatrix(tp=3, fp=1, fn=2, tn=4))
    assert m.recall == pytest.approx(0.6, abs=1e-12)
    assert m.specificity == pytest.approx(0.8, abs=1e-12)
    assert m.balanced_accuracy == pytest.approx(0.7, abs=1e-12)
    assert m.accuracy == pytest.approx(0.7, abs=1e-12)
    assert m.precision_positive == pytest.approx(0.75, abs=1e-12)
    assert m.f1_positive == pytest.approx(2 / 3, abs=1e-12)
    # Negative class: precision 4/6, recall 0.8
    assert m.precision_macro == pytest.approx((0.75 + 4 / 6) / 2, abs=1e-12)
    assert m.f1_macro == pytest.approx((2 / 3 + 2 * (4 / 6) * 0.8 / (4 / 6 + 0.8)) / 2, abs=1e-12)
    assert m.warnings == []


def test_perfect_matrix():
    m = compute_metrics(ConfusionMatrix(tp=5, fp=0, fn=0, tn=7))
    for name in MetricsRecord.FIELDS:
        assert getattr(m, name) == 1.0


def test_zero_denominator_convention():
    """No positive predictions: precision and F1 are 0 and flagged"""
    m = compute_metrics(ConfusionMatrix(tp=0, fp=0, fn=4, tn=6))
    assert m.precision_positive == 0.0
    assert m.recall == 0.0
    assert m.f1_positive == 0.0
    assert any(w.startswith("precision_positive") for w in m.warnings)


def test_zero_denominator_logs_warning(caplog):
    caplog.set_level(logging.WARNING, logger="balens")
    compute_metrics(ConfusionMatrix(tp=0, fp=0, fn=4, tn=6))
    records = [r for r in caplog.records if r.name.startswith("balens")]
    assert [r.levelno for r in records] == [logging.WARNING]
    assert "precision_positive" in records[0].getMessage()

    caplog.clear()
    compute_metrics(ConfusionMatrix(tp=3, fp=1, fn=1, tn=5))
    assert not [r for r in caplog.records if r.name.startswith("balens")]


def test_empty_confusion():
    with pytest.raises(EmptyConfusion):
        compute_metrics(ConfusionMatrix(0, 0, 0, 0))


def test_balanced_accuracy_identity_and_ranges():
    """Balanced accuracy is exactly the mean of recall and specificity"""
    rng = np.random.default_rng(0)
    for _ in range(1000):
        tp, fp, fn, tn = (int(v) for v in rng.integers(0, 50, 4))
        if tp + fp + fn + tn == 0:
            continue
        m = compute_metrics(ConfusionMatrix(tp, fp, fn, tn))
        assert m.balanced_accuracy == (m.recall + m.specificity) / 2
        for name in MetricsRecord.FIELDS:
            assert 0.0 <= getattr(m, name) <= 1.0


def test_accuracy_equals_balanced_accuracy_on_balanced_sets():
    rng = np.random.default_rng(1)
    for _ in range(200):
        half = int(rng.integers(1, 100))
        tp = int(rng.integers(0, half + 1))
        tn = int(rng.integers(0, half + 1))
        m = compute_metrics(ConfusionMatrix(tp=tp, fp=half - tn, fn=half - tp, tn=tn))
        assert m.accuracy == pytest.approx(m.balanced_accuracy, abs=1e-12)


def test_mean_metrics_is_fieldwise_mean():
    a = compute_metrics(ConfusionMatrix(3, 1, 2, 4))
    b = compute_metrics(ConfusionMatrix(5, 0, 0, 5))
    mean = mean_metrics([a, b])
    for name in MetricsRecord.FIELDS:
        assert getattr(mean, name) == pytest.approx((getattr(a, name) + getattr(b, name)) / 2, abs=1e-12)
    with pytest.raises(EmptyList):
        mean_metrics([])


def test_roc_examples():
    assert roc_curve([0, 0, 1, 1], [0, 0, 1, 1]).auc == 1.0
    assert roc_curve([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8]).auc == pytest.approx(0.75, abs=1e-12)

    flat = roc_curve([0, 1, 0, 1], [0.3, 0.3, 0.3, 0.3])
    assert flat.auc == 0.5
    assert flat.fpr.tolist() == [0.0, 1.0]
    assert flat.tpr.tolist() == [0.0, 1.0]
    assert math.isinf(flat.thresholds[0])


def test_roc_shape():
    """Curve runs from (0, 0) to (1, 1) without stepping backwards"""
    rng = np.random.default_rng(2)
    y = rng.integers(0, 2, 300)
    y[:2] = [0, 1]
    scores = np.round(rng.random(300), 2)
    curve = roc_curve(y, scores)
    assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
    assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)
    assert np.all(np.diff(curve.fpr) >= 0) and np.all(np.diff(curve.tpr) >= 0)
    assert np.all(np.diff(curve.thresholds) < 0)


def test_auc_matches_pair_counting_oracle():
    """Trapezoidal AUC equals the Mann-Whitney statistic, ties included"""
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(2, 1001))
        y = rng.integers(0, 2, n)
        y[0], y[1] = 0, 1
        if rng.random() < 0.5:
            scores = rng.integers(0, 10, n).astype(float)
        else:
            scores = rng.random(n)
        assert roc_curve(y, scores).auc == pytest.approx(auc_oracle(y, scores), abs=1e-9)


def test_oracle_examples():
    assert auc_oracle([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8]) == 0.75
    assert auc_oracle([0, 0, 1, 1], [-0.1, -0.4, -0.35, -0.8]) == 0.25
    assert auc_oracle([0, 1, 1], [2.0, 2.0, 2.0]) == 0.5


def test_roc_errors():
    with pytest.raises(SingleClassDataset):
        roc_curve([1, 1, 1], [0.1, 0.2, 0.3])
    with pytest.raises(LengthMismatch):
        roc_curve([0, 1], [0.5])
    with pytest.raises(SingleClassDataset):
        auc_oracle([0, 0], [0.1, 0.2])


def test_average_confusions():
    """Rows are normalized per true class before averaging"""
    a = ConfusionMatrix(tp=4, fp=1, fn=6, tn=9)
    b = ConfusionMatrix(tp=8, fp=3, fn=2, tn=7)
    avg = average_confusions([a, b])
    assert avg[1, 1] == pytest.approx(0.6, abs=1e-12)
    assert avg[0, 0] == pytest.approx((0.9 + 0.7) / 2, abs=1e-12)
    assert np.allclose(avg.sum(axis=1), 1.0, atol=1e-9)
    assert np.array_equal(average_confusions([a, a]), a.normalized())


def test_average_confusions_errors():
    with pytest.raises(EmptyList):
        average_confusions([])
    with pytest.raises(ZeroRow):
        average_confusions([ConfusionMatrix(tp=0, fp=1, fn=0, tn=3)])


def test_roc_csv_round_trip(tmp_path):
    curve = roc_curve([0, 0, 1, 1, 0, 1], [0.2, 0.6, 0.6, 0.9, 0.1, 0.3])
    path = tmp_path / "roc.csv"
    write_roc_csv({"brf": curve}, path)
    again = read_roc_csv(path)["brf"]
    assert again.fpr.tolist() == curve.fpr.tolist()
    assert again.tpr.tolist() == curve.tpr.tolist()
    assert again.auc == curve.auc
    assert path.read_text().splitlines()[0] == "classifier,threshold,fpr,tpr"
