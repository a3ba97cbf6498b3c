"""Per-class accuracy, F1 and IoU as reported for vessel classification and segmentation."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

POSITIVE_CLASS = 1
CLASS_NAMES = {0: "V.", 1: "A."}


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def _pair(pred, truth):
    pred, truth = np.asarray(pred).ravel(), np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"pred has {pred.size} entries but truth has {truth.size}")
    return pred, truth


def confusion(pred, truth, cls: int = POSITIVE_CLASS) -> ConfusionCounts:
    pred, truth = _pair(pred, truth)
    p, t = pred == cls, truth == cls
    return ConfusionCounts(int(np.sum(p & t)), int(np.sum(p & ~t)), int(np.sum(~p & t)), int(np.sum(~p & ~t)))


def per_class_accuracy(pred, truth, cls: int) -> float:
    pred, truth = _pair(pred, truth)
    members = truth == cls
    total = int(members.sum())
    if total == 0:
        raise ValueError(f"class {cls} does not occur in truth")
    return 100.0 * int(np.sum(pred[members] == cls)) / total


def f1(conf: ConfusionCounts) -> float:
    """Harmonic mean of precision and recall; 1.0 when there is nothing to find."""
    if conf.tp == 0:
        return 1.0 if conf.fp + conf.fn == 0 else 0.0
    return 2 * conf.tp / (2 * conf.tp + conf.fp + conf.fn)


def iou(pred_labels, truth_labels, cls: int) -> float:
    pred, truth = _pair(pred_labels, truth_labels)
    p, t = pred == cls, truth == cls
    union = int(np.sum(p | t))
    if union == 0:
        return 100.0
    return 100.0 * int(np.sum(p & t)) / union


def mean_cloud_iou(preds, truths, cls: int) -> float:
    """Alternate statistic: IoU per cloud, then averaged."""
    return float(np.mean([iou(p, t, cls) for p, t in zip(preds, truths)]))


@dataclass
class MetricsReport:
    task: str
    values: dict[str, float]
    counts: dict[str, int] = field(default_factory=dict)
    config_hash: str = ""
    seed: int = 0

    def to_record(self) -> str:
        return json.dumps({"kind": "metrics", **asdict(self)}, sort_keys=True)

    def to_table(self) -> str:
        width = max(len(k) for k in self.values)
        lines = [f"{'metric':<{width}}  value", f"{'-' * width}  -------"]
        for key, value in self.values.items():
            lines.append(f"{key:<{width}}  {value:.4f}")
        return "\n".join(lines)


def classification_report(pred, truth, **meta) -> MetricsReport:
    pred, truth = _pair(pred, truth)
    conf = confusion(pred, truth, POSITIVE_CLASS)
    values = {}
    for cls, label in CLASS_NAMES.items():
        if np.any(truth == cls):
            values[f"{label} acc(%)"] = per_class_accuracy(pred, truth, cls)
    values["F1"] = f1(conf)
    values["overall acc(%)"] = 100.0 * float(np.mean(pred == truth))
    return MetricsReport("cls", values, asdict(conf), **meta)


def segmentation_report(preds, truths, **meta) -> MetricsReport:
    """Dataset-level IoU (points pooled over clouds) plus per-cloud means."""
    preds = [np.asarray(p).ravel() for p in preds]
    truths = [np.asarray(t).ravel() for t in truths]
    pooled_p, pooled_t = np.concatenate(preds), np.concatenate(truths)
    values = {}
    for cls, label in CLASS_NAMES.items():
        values[f"IoU_{label}(%)"] = iou(pooled_p, pooled_t, cls)
    for cls, label in CLASS_NAMES.items():
        values[f"mean-cloud IoU_{label}(%)"] = mean_cloud_iou(preds, truths, cls)
    values["point acc(%)"] = 100.0 * float(np.mean(pooled_p == pooled_t))
    return MetricsReport("seg", values, {"points": int(pooled_t.size)}, **meta)
