import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcdual.pointops import (PointCloud, farthest_point_sample, interpolate_features, interpolation_weights,
                             knn_group, knn_indices)


def fps_oracle(coords, n1, start=0):
    """Greedy max-min selection, recomputing every min distance from scratch."""
    picks = [start]
    while len(picks) < n1:
        best, best_d = None, -1.0
        for i in range(len(coords)):
            d = min(sum((coords[i][a] - coords[j][a]) ** 2 for a in range(3)) for j in picks)
            if d > best_d:
                best, best_d = i, d
        picks.append(best)
    return picks


def knn_oracle(coords, query, k):
    out = []
    for q in query:
        ranked = sorted(range(len(coords)), key=lambda i: (sum((coords[i][a] - q[a]) ** 2 for a in range(3)), i))
        ranked = ranked[:k] + [ranked[0]] * max(0, k - len(ranked))
        out.append(ranked)
    return out


def cloud_of(coords):
    coords = np.asarray(coords, dtype=float)
    return PointCloud(coords, np.tile([0.0, 0.0, 1.0], (len(coords), 1)))


def test_fps_collinear():
    coords = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]])
    assert sorted(farthest_point_sample(coords, 2).tolist()) == [0, 2]


def test_fps_exhaustive(rng):
    coords = rng.normal(size=(9, 3))
    assert sorted(farthest_point_sample(coords, 9).tolist()) == list(range(9))


def test_fps_square_tie_breaks_low():
    coords = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])
    assert farthest_point_sample(coords, 3).tolist() == [0, 3, 1]
    assert fps_oracle(coords.tolist(), 3) == [0, 3, 1]


def test_fps_rejects_too_many():
    with pytest.raises(ValueError):
        farthest_point_sample(np.zeros((3, 3)), 4)


def test_fps_matches_oracle_random(rng):
    for _ in range(25):
        n = int(rng.integers(1, 40))
        coords = rng.normal(size=(n, 3))
        n1 = int(rng.integers(1, n + 1))
        start = int(rng.integers(0, n))
        assert farthest_point_sample(coords, n1, start).tolist() == fps_oracle(coords.tolist(), n1, start)


def test_fps_distinct_and_deterministic(rng):
    coords = rng.normal(size=(50, 3))
    a = farthest_point_sample(coords, 20)
    assert len(set(a.tolist())) == 20
    assert np.array_equal(a, farthest_point_sample(coords, 20))


def test_knn_k1_is_self(rng):
    cloud = cloud_of(rng.normal(size=(10, 3)))
    g = knn_group(cloud, [2, 5, 7], 1)
    assert g.group_indices[:, 0].tolist() == [2, 5, 7]
    assert np.all(g.group_features[:, 0, :3] == 0.0)


def test_knn_collinear_offsets():
    cloud = cloud_of([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]])
    g = knn_group(cloud, [1], 3)
    assert sorted(g.group_features[0, :, 0].tolist()) == [-1.0, 0.0, 1.0]


def test_knn_duplicate_fill():
    cloud = cloud_of([[0.0, 0, 0], [3, 0, 0]])
    g = knn_group(cloud, [1], 3)
    assert g.group_indices[0].tolist() == [1, 0, 1]


def test_knn_none_groups_everything(rng):
    cloud = cloud_of(rng.normal(size=(6, 3)))
    g = knn_group(cloud, [0, 3], None)
    assert g.group_indices.shape == (2, 6)


def test_knn_normals_copied_untranslated(rng):
    cloud = PointCloud(rng.normal(size=(8, 3)), rng.normal(size=(8, 3)))
    g = knn_group(cloud, [4], 5)
    assert np.array_equal(g.group_features[0, :, 3:], cloud.normals[g.group_indices[0]])


def test_knn_matches_sort_oracle(rng):
    for _ in range(30):
        n = int(rng.integers(1, 30))
        coords = rng.integers(-3, 4, size=(n, 3)).astype(float)  # many exact ties
        query = coords[rng.integers(0, n, size=4)]
        k = int(rng.integers(1, n + 4))
        assert knn_indices(coords, query, k).tolist() == knn_oracle(coords.tolist(), query.tolist(), k)


def test_interpolation_coincident_source(rng):
    src = rng.normal(size=(5, 3))
    feats = rng.normal(size=(5, 4))
    out = interpolate_features(src, feats, src[[3, 1]])
    assert np.array_equal(out, feats[[3, 1]])


def test_interpolation_partition_of_unity(rng):
    src = rng.normal(size=(3, 3))
    v = rng.normal(size=4)
    out = interpolate_features(src, np.tile(v, (3, 1)), rng.normal(size=(6, 3)))
    assert np.allclose(out, v, atol=1e-12)


def test_interpolation_midpoint():
    src = np.array([[0.0, 0, 0], [2, 0, 0], [100, 100, 100]])
    feats = np.array([[0.0], [1.0], [7.0]])
    out = interpolate_features(src, feats, np.array([[1.0, 0, 0]]))
    assert 0.45 < out[0, 0] < 0.55


def test_interpolation_fewer_than_three_sources():
    src = np.array([[0.0, 0, 0], [1, 0, 0]])
    idx, w = interpolation_weights(src, np.array([[0.25, 0, 0]]))
    assert idx.shape == (1, 2)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31 - 1))
def test_interpolation_weights_convex(n_src, n_dst, seed):
    r = np.random.default_rng(seed)
    src, dst = r.normal(size=(n_src, 3)), r.normal(size=(n_dst, 3))
    feats = r.normal(size=(n_src, 3))
    idx, w = interpolation_weights(src, dst)
    assert np.all(w >= 0)
    assert np.all(np.abs(w.sum(axis=1) - 1) < 1e-12)
    out = interpolate_features(src, feats, dst)
    lo = np.min(feats[idx], axis=1)
    hi = np.max(feats[idx], axis=1)
    assert np.all(out >= lo - 1e-12) and np.all(out <= hi + 1e-12)


def test_interpolation_translation_equivariant(rng):
    # dyadic grid coordinates keep the shifted differences exact
    src = rng.integers(-8, 8, size=(7, 3)) / 4.0
    dst = rng.integers(-8, 8, size=(5, 3)) / 8.0
    feats = rng.normal(size=(7, 2))
    shift = np.array([2.0, -4.0, 0.5])
    assert np.array_equal(interpolate_features(src, feats, dst), interpolate_features(src + shift, feats, dst + shift))


def test_interpolation_rejects_non_finite():
    with pytest.raises(ValueError):
        interpolate_features(np.array([[np.nan, 0, 0]]), np.ones((1, 1)), np.zeros((1, 3)))


def test_pointcloud_validation():
    with pytest.raises(ValueError):
        PointCloud(np.zeros((0, 3)), np.zeros((0, 3)))
    with pytest.raises(ValueError):
        PointCloud(np.array([[np.inf, 0, 0]]), np.zeros((1, 3)))
