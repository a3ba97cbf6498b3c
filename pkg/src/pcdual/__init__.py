"""Unsupervised dual-branch contrastive learning on 3D point clouds.

Pretraining pairs each cloud with jittered copies, encodes them with a
global (per-point MLP + max-pool) branch and a hierarchical (set
abstraction) branch, and minimizes NT-Xent over a shared projection head.
Downstream heads then classify or segment from the frozen representations.
"""
from .pointops import PointCloud

__version__ = "0.1.0"

__all__ = ["PointCloud", "__version__"]
