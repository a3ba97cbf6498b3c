from fractions import Fraction

import numpy as np
import pytest

from pcdual.metrics import (ConfusionCounts, classification_report, confusion, f1, iou, per_class_accuracy,
                            segmentation_report)


def oracle(pred, truth, cls):
    """Count a confusion matrix with plain loops and exact arithmetic."""
    tp = fp = fn = tn = 0
    for p, t in zip(pred, truth):
        if p == cls and t == cls:
            tp += 1
        elif p == cls:
            fp += 1
        elif t == cls:
            fn += 1
        else:
            tn += 1
    acc = None if tp + fn == 0 else Fraction(100 * tp, tp + fn)
    if tp + fp + fn == 0:
        f, j = Fraction(1), Fraction(100)
    else:
        f = Fraction(2 * tp, 2 * tp + fp + fn)
        j = Fraction(100 * tp, tp + fp + fn)
    return (tp, fp, fn, tn), acc, f, j


def test_accuracy_examples():
    truth = np.array([0, 0, 1, 1])
    assert per_class_accuracy(truth, truth, 0) == 100.0 and per_class_accuracy(truth, truth, 1) == 100.0
    zeros = np.zeros(4, dtype=int)
    assert per_class_accuracy(zeros, truth, 0) == 100.0 and per_class_accuracy(zeros, truth, 1) == 0.0
    pred = np.array([0, 1, 1, 1])
    assert per_class_accuracy(pred, truth, 0) == 50.0 and per_class_accuracy(pred, truth, 1) == 100.0
    with pytest.raises(ValueError):
        per_class_accuracy(zeros, zeros, 1)


def test_f1_examples():
    assert f1(ConfusionCounts(5, 0, 0, 3)) == 1.0
    assert f1(ConfusionCounts(1, 1, 1, 0)) == 0.5
    assert f1(ConfusionCounts(0, 0, 0, 9)) == 1.0
    assert f1(ConfusionCounts(0, 2, 1, 0)) == 0.0
    with pytest.raises(ValueError):
        ConfusionCounts(-1, 0, 0, 0)


def test_iou_examples():
    labels = np.array([0, 1, 1, 0, 2])
    for cls in (0, 1, 2):
        assert iou(labels, labels, cls) == 100.0
    assert iou([1, 1, 0, 0], [0, 0, 1, 1], 1) == 0.0
    truth = [1, 1, 1, 1, 0, 0]
    pred = [1, 1, 0, 0, 1, 1]
    assert iou(pred, truth, 1) == pytest.approx(100 / 3, abs=1e-12)
    assert iou([0, 0], [0, 0], 1) == 100.0
    with pytest.raises(ValueError):
        iou([0], [0, 1], 1)


def test_brute_force_oracle(rng):
    for case in range(1000):
        n = int(rng.integers(1, 12))
        bias = rng.uniform()
        truth = (rng.random(n) < bias).astype(int)
        pred = (rng.random(n) < rng.uniform()).astype(int)
        if case % 50 == 0:
            truth[:] = 0
            pred[:] = 0 if case % 100 == 0 else pred
        for cls in (0, 1):
            counts, acc, f, j = oracle(pred.tolist(), truth.tolist(), cls)
            conf = confusion(pred, truth, cls)
            assert (conf.tp, conf.fp, conf.fn, conf.tn) == counts
            assert conf.total == n
            if acc is None:
                with pytest.raises(ValueError):
                    per_class_accuracy(pred, truth, cls)
            else:
                assert per_class_accuracy(pred, truth, cls) == float(acc)
            assert f1(conf) == float(f)
            assert iou(pred, truth, cls) == float(j)
            assert 0 <= f1(conf) <= 1 and 0 <= iou(pred, truth, cls) <= 100


def test_metrics_permutation_invariant(rng):
    pred, truth = rng.integers(0, 2, 30), rng.integers(0, 2, 30)
    perm = rng.permutation(30)
    for cls in (0, 1):
        assert iou(pred, truth, cls) == iou(pred[perm], truth[perm], cls)
        assert per_class_accuracy(pred, truth, cls) == per_class_accuracy(pred[perm], truth[perm], cls)
        assert f1(confusion(pred, truth, cls)) == f1(confusion(pred[perm], truth[perm], cls))


def test_reports():
    rep = classification_report([0, 1, 1, 1], [0, 0, 1, 1], config_hash="ab", seed=3)
    assert rep.values == {"V. acc(%)": 50.0, "A. acc(%)": 100.0, "F1": 0.8, "overall acc(%)": 75.0}
    assert '"seed": 3' in rep.to_record() and "F1" in rep.to_table()
    seg = segmentation_report([[0, 1], [1, 1]], [[0, 1], [0, 1]])
    assert seg.values["IoU_A.(%)"] == pytest.approx(200 / 3)
    assert seg.values["IoU_V.(%)"] == 50.0
    assert seg.values["mean-cloud IoU_V.(%)"] == 50.0
    assert seg.counts == {"points": 4}
