"""Point-cloud augmentations and positive-pair construction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pointops import PointCloud

KINDS = ("jitter", "rotation", "perturbation", "jitter+perturbation")


@dataclass(frozen=True)
class AugmentConfig:
    kind: str = "jitter"
    sigma: float = 0.01
    clip: float = 0.05
    max_perturb_angle: float = 0.06
    renormalize_normals: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"augmentation kind must be one of {KINDS}, got {self.kind!r}")
        if self.sigma < 0 or self.clip < 0 or self.max_perturb_angle < 0:
            raise ValueError("sigma, clip and max_perturb_angle must be non-negative")


@dataclass
class AugmentedPair:
    view_a: PointCloud
    view_b: PointCloud
    source_id: int | str | None = None


def _with(cloud: PointCloud, coords, normals) -> PointCloud:
    labels = None if cloud.labels is None else cloud.labels.copy()
    return PointCloud(coords, normals, labels)


def jitter(cloud: PointCloud, sigma: float, clip: float, rng: np.random.Generator,
           renormalize_normals: bool = False) -> PointCloud:
    """Add clipped Gaussian noise to all six components of every point."""
    if sigma < 0 or clip < 0:
        raise ValueError("sigma and clip must be non-negative")
    if sigma == 0 or clip == 0:
        return _with(cloud, cloud.coords.copy(), cloud.normals.copy())
    noise = np.clip(rng.normal(0.0, sigma, size=(cloud.n, 6)), -clip, clip)
    coords = cloud.coords + noise[:, :3]
    normals = cloud.normals + noise[:, 3:]
    if renormalize_normals:
        norms = np.linalg.norm(normals, axis=1, keepdims=True)
        normals = np.where(norms > 0, normals / np.where(norms > 0, norms, 1.0), normals)
    return _with(cloud, coords, normals)


def rotation_y(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    # row-vector convention: p' = p @ R.T
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rotation_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rotation_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def apply_rotation(cloud: PointCloud, rot: np.ndarray) -> PointCloud:
    return _with(cloud, cloud.coords @ rot.T, cloud.normals @ rot.T)


def rotate_y(cloud: PointCloud, rng: np.random.Generator | None = None, theta: float | None = None) -> PointCloud:
    """Rotate coordinates and normals about Y by a uniform angle in [0, 2pi)."""
    if theta is None:
        theta = rng.uniform(0.0, 2 * np.pi)
    return apply_rotation(cloud, rotation_y(theta))


def perturb(cloud: PointCloud, max_angle: float, rng: np.random.Generator) -> PointCloud:
    """Small random rotation ``Rz @ Ry @ Rx`` with angles in ``[-max_angle, max_angle]``."""
    if max_angle < 0:
        raise ValueError("max_angle must be non-negative")
    if max_angle == 0:
        return _with(cloud, cloud.coords.copy(), cloud.normals.copy())
    ax, ay, az = rng.uniform(-max_angle, max_angle, size=3)
    rot = _rotation_z(az) @ rotation_y(ay) @ _rotation_x(ax)
    return apply_rotation(cloud, rot)


def augment(cloud: PointCloud, config: AugmentConfig, rng: np.random.Generator, kind: str | None = None) -> PointCloud:
    kind = kind or config.kind
    if kind == "jitter":
        return jitter(cloud, config.sigma, config.clip, rng, config.renormalize_normals)
    if kind == "rotation":
        return rotate_y(cloud, rng)
    if kind == "perturbation":
        return perturb(cloud, config.max_perturb_angle, rng)
    raise ValueError(f"no single transform for kind {kind!r}")


def make_pair(cloud: PointCloud, config: AugmentConfig, rng_a: np.random.Generator,
              rng_b: np.random.Generator, source_id=None) -> AugmentedPair:
    """Two independent views of ``cloud``.

    For ``jitter+perturbation`` the first view is jittered and the second
    perturbed; every other kind applies the same transform to both.
    """
    if config.kind == "jitter+perturbation":
        a = augment(cloud, config, rng_a, "jitter")
        b = augment(cloud, config, rng_b, "perturbation")
    else:
        a = augment(cloud, config, rng_a)
        b = augment(cloud, config, rng_b)
    return AugmentedPair(a, b, source_id)
