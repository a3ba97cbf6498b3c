"""Supervised heads trained on frozen representations."""
from __future__ import annotations

import numpy as np

from .diffcore import MLP, Tensor, ops
from .diffcore.layers import init_rng
from .diffcore.tensor import as_tensor
from .errors import DimensionError

CLS_WIDTHS = (512, 256, 128)
SEG_WIDTHS = (1024, 512, 256)


class ClassifierHead(MLP):
    """Linear stages (512, 256, 128, a) over concatenated global features."""

    checkpoint_prefix = "head.cls."

    def __init__(self, c_in: int = 2048, num_classes: int = 2, widths=CLS_WIDTHS, seed: int = 0,
                 dtype=np.float64):
        super().__init__(c_in, tuple(widths) + (num_classes,), init_rng(seed, "head.cls"),
                         final_plain=True, dtype=dtype, names=[f"fc{i + 1}" for i in range(len(widths) + 1)])
        self.num_classes = num_classes


class SegmenterHead(MLP):
    """Per-point stages (1024, 512, 256, m) over concatenated per-point features."""

    checkpoint_prefix = "head.seg."

    def __init__(self, c_in: int = 4096, num_classes: int = 2, widths=SEG_WIDTHS, seed: int = 0,
                 dtype=np.float64):
        super().__init__(c_in, tuple(widths) + (num_classes,), init_rng(seed, "head.seg"),
                         final_plain=True, dtype=dtype, names=[f"conv{i + 1}" for i in range(len(widths) + 1)])
        self.num_classes = num_classes


def _check_width(x: Tensor, head: MLP) -> None:
    if x.shape[-1] != head.layers[0].c_in:
        raise DimensionError("features", f"head expects width {head.layers[0].c_in}, got {x.shape[-1]}")


def classify(h_concat, head: ClassifierHead) -> Tensor:
    x = as_tensor(h_concat, dtype=head.layers[0].weight.dtype)
    _check_width(x, head)
    return head(x)


def segment(per_point_concat, head: SegmenterHead) -> Tensor:
    x = as_tensor(per_point_concat, dtype=head.layers[0].weight.dtype)
    _check_width(x, head)
    return head(x)


def softmax(logits) -> np.ndarray:
    v = np.asarray(logits.values if isinstance(logits, Tensor) else logits, dtype=np.float64)
    e = np.exp(v - v.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits, labels) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under softmax(``logits``)."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    classes = logits.shape[-1]
    if labels.shape != logits.shape[:-1]:
        raise DimensionError("labels", f"expected shape {logits.shape[:-1]}, got {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise ValueError(f"labels must lie in [0, {classes})")
    flat = ops.reshape(ops.log_softmax(logits), (-1, classes))
    picked = ops.index(flat, (np.arange(labels.size), labels.ravel()))
    return ops.mul(ops.sum(picked), -1.0 / labels.size)
