"""NT-Xent loss over a batch of 2N embeddings.

Rows ``2k`` and ``2k + 1`` (zero-based) form positive pair ``k``; every
other row in the batch acts as a negative for both of them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffcore import Tensor, ops
from .diffcore.tensor import as_tensor

DEFAULT_TAU = 0.5


@dataclass
class EmbeddingBatch:
    z: Tensor
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        self.z = as_tensor(self.z)
        rows = self.z.shape[0]
        if self.z.values.ndim != 2 or rows < 2 or rows % 2:
            raise ValueError(f"need an even number (>= 2) of embedding rows, got shape {self.z.shape}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if np.any(np.linalg.norm(self.z.values, axis=1) == 0):
            raise ValueError("every embedding row needs a nonzero norm")

    @property
    def num_pairs(self) -> int:
        return self.z.shape[0] // 2

    def partner(self, i: int) -> int:
        return i ^ 1


def cosine_similarity(z_i, z_j) -> Tensor:
    z_i, z_j = as_tensor(z_i), as_tensor(z_j)
    if np.linalg.norm(z_i.values) == 0 or np.linalg.norm(z_j.values) == 0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return ops.sum(ops.mul(ops.l2_normalize(z_i), ops.l2_normalize(z_j)))


def similarity_matrix(z) -> Tensor:
    u = ops.l2_normalize(as_tensor(z), axis=-1)
    return ops.matmul(u, ops.transpose(u))


def pair_probability(batch: EmbeddingBatch, i: int, j: int) -> float:
    """Softmax of untempered similarity of ``j`` among all rows but ``i``."""
    rows = batch.z.shape[0]
    if i == j or not (0 <= i < rows and 0 <= j < rows):
        raise ValueError(f"need distinct row indices in [0, {rows}), got ({i}, {j})")
    s = similarity_matrix(batch.z.values).values[i]
    others = np.delete(s, i)
    peak = others.max()
    return float(np.exp(s[j] - peak) / np.exp(others - peak).sum())


def ntxent_loss(batch: EmbeddingBatch | Tensor, tau: float | None = None) -> Tensor:
    if not isinstance(batch, EmbeddingBatch):
        batch = EmbeddingBatch(batch, DEFAULT_TAU if tau is None else tau)
    elif tau is not None:
        batch = EmbeddingBatch(batch.z, tau)
    rows = batch.z.shape[0]
    logits = ops.mul(similarity_matrix(batch.z), 1.0 / batch.tau)
    logp = ops.log_softmax(logits, exclude=np.eye(rows, dtype=bool))
    anchors = np.arange(rows)
    positives = ops.index(logp, (anchors, anchors ^ 1))
    return ops.mul(ops.sum(positives), -1.0 / rows)
