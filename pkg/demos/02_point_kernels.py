"""
Sampling, grouping and interpolation
====================================

The hierarchical branch is built from three kernels: farthest point
sampling picks well spread centroids, kNN grouping gathers each
centroid's neighbourhood in local coordinates, and inverse-distance
interpolation carries coarse features back to every point.
"""
import numpy as np

from pcdual.pointops import PointCloud, farthest_point_sample, interpolate_features, knn_group

rng = np.random.default_rng(1)
coords = rng.uniform(-1, 1, size=(200, 3))
normals = coords / np.linalg.norm(coords, axis=1, keepdims=True)
cloud = PointCloud(coords, normals)

centroids = farthest_point_sample(cloud.coords, 16)
print("first centroids:", centroids[:6])
spread = np.linalg.norm(coords[centroids][:, None] - coords[centroids][None], axis=-1)
print(f"closest pair of centroids: {spread[spread > 0].min():.3f}")

groups = knn_group(cloud, centroids, 8)
print("group tensor:", groups.group_features.shape, "(centroids, k, local xyz + normals)")
print("each centroid is its own nearest neighbour:", np.all(groups.group_indices[:, 0] == centroids))

# carry a per-centroid feature back to all 200 points
feature = coords[centroids, :1]
dense = interpolate_features(coords[centroids], feature, coords)
print("interpolated x at the centroids equals the source:", np.array_equal(dense[centroids], feature))
print(f"mean interpolation error of x elsewhere: {np.mean(np.abs(dense[:, 0] - coords[:, 0])):.3f}")
