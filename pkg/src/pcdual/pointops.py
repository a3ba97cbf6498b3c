"""Farthest-point sampling, kNN grouping and inverse-distance interpolation.

All kernels use brute-force pairwise distances; the clouds handled here
stay in the low thousands of points.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

INTERP_EPS = 1e-8
COINCIDE_EPS = 1e-10
INTERP_NEIGHBORS = 3


@dataclass
class PointCloud:
    coords: np.ndarray
    normals: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64).reshape(-1, 3)
        self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
        if self.coords.shape != self.normals.shape:
            raise DimensionError("normals", f"{self.normals.shape} does not match coords {self.coords.shape}")
        if self.coords.shape[0] < 1:
            raise ValueError("a point cloud needs at least one point")
        if not (np.all(np.isfinite(self.coords)) and np.all(np.isfinite(self.normals))):
            raise ValueError("coordinates and normals must be finite")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
            if self.labels.shape[0] != self.n:
                raise DimensionError("labels", f"{self.labels.shape[0]} labels for {self.n} points")
            if np.any(self.labels < 0):
                raise ValueError("labels must be non-negative")

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def features(self) -> np.ndarray:
        """The ``n x 6`` array of coordinates followed by normals."""
        return np.concatenate([self.coords, self.normals], axis=1)

    @classmethod
    def from_features(cls, feats, labels=None) -> "PointCloud":
        feats = np.asarray(feats, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[1] != 6:
            raise DimensionError("feats", f"expected n x 6, got {feats.shape}")
        return cls(feats[:, :3], feats[:, 3:], labels)

    def take(self, idx) -> "PointCloud":
        labels = None if self.labels is None else self.labels[idx]
        return PointCloud(self.coords[idx], self.normals[idx], labels)


@dataclass
class GroupedSet:
    centroids: np.ndarray
    group_indices: np.ndarray
    group_features: np.ndarray = field(repr=False)


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def farthest_point_sample(coords, n1: int, start_index: int = 0) -> np.ndarray:
    """Greedy max-min selection of ``n1`` indices, ties to the lowest index."""
    coords = np.asarray(coords, dtype=np.float64)
    n = coords.shape[0]
    if not 1 <= n1 <= n:
        raise ValueError(f"n1 must lie in [1, {n}], got {n1}")
    if not 0 <= start_index < n:
        raise ValueError(f"start_index {start_index} out of range for {n} points")
    picks = np.empty(n1, dtype=np.int64)
    picks[0] = start_index
    diff = coords - coords[start_index]
    mind = np.einsum("ij,ij->i", diff, diff)
    for i in range(1, n1):
        nxt = int(np.argmax(mind))
        picks[i] = nxt
        diff = coords - coords[nxt]
        np.minimum(mind, np.einsum("ij,ij->i", diff, diff), out=mind)
    return picks


def knn_indices(coords, query, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest ``coords`` to each query point.

    Ties go to the lower index. When ``k`` exceeds the point count the
    nearest point fills the remaining slots.
    """
    coords = np.asarray(coords, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    if coords.shape[0] == 0:
        raise ValueError("cannot group an empty cloud")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    d = _sq_dists(query, coords)
    order = np.argsort(d, axis=1, kind="stable")
    n = coords.shape[0]
    if k <= n:
        return order[:, :k]
    fill = np.repeat(order[:, :1], k - n, axis=1)
    return np.concatenate([order, fill], axis=1)


def knn_group(cloud: PointCloud, centroid_indices, k: int | None) -> GroupedSet:
    """Group the ``k`` nearest points around each centroid.

    Group coordinates are relative to the centroid; normals are copied as
    they are. ``k=None`` places every point in each group.
    """
    if cloud.n == 0:
        raise ValueError("cannot group an empty cloud")
    centroid_indices = np.asarray(centroid_indices, dtype=np.int64)
    centroids = cloud.coords[centroid_indices]
    if k is None:
        idx = np.broadcast_to(np.arange(cloud.n), (len(centroid_indices), cloud.n)).copy()
    else:
        idx = knn_indices(cloud.coords, centroids, k)
    local = cloud.coords[idx] - centroids[:, None, :]
    feats = np.concatenate([local, cloud.normals[idx]], axis=-1)
    return GroupedSet(centroids=centroids, group_indices=idx, group_features=feats)


def interpolation_weights(src_coords, dst_coords) -> tuple[np.ndarray, np.ndarray]:
    """Neighbor indices and normalized inverse-square-distance weights.

    Returns ``(idx, w)`` of shape ``(n_dst, k)`` with ``k = min(3, n_src)``.
    A destination within ``COINCIDE_EPS`` of a source gets weight one on
    that source alone.
    """
    src = np.asarray(src_coords, dtype=np.float64)
    dst = np.asarray(dst_coords, dtype=np.float64)
    if src.shape[0] < 1:
        raise ValueError("interpolation needs at least one source point")
    if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
        raise ValueError("interpolation coordinates must be finite")
    k = min(INTERP_NEIGHBORS, src.shape[0])
    d2 = _sq_dists(dst, src)
    idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
    near = np.take_along_axis(d2, idx, axis=1)
    w = 1.0 / (near + INTERP_EPS)
    w /= w.sum(axis=1, keepdims=True)
    coincident = np.sqrt(near[:, 0]) < COINCIDE_EPS
    if np.any(coincident):
        w[coincident] = 0.0
        w[coincident, 0] = 1.0
    return idx, w


def interpolate_features(src_coords, src_feats, dst_coords) -> np.ndarray:
    src_feats = np.asarray(src_feats, dtype=np.float64)
    idx, w = interpolation_weights(src_coords, dst_coords)
    out = np.einsum("mk,mkc->mc", w, src_feats[idx])
    coincident = w[:, 0] == 1.0
    out[coincident] = src_feats[idx[coincident, 0]]
    return out
