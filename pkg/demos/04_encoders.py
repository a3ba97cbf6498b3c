"""
Dual-branch encoders
====================

Branch 1 is a shared per-point MLP followed by max-pooling. Branch 2
abstracts the cloud in three levels. For classification both give a
1024-vector; for segmentation each gives an n x 2048 per-point tensor
(local features next to the tiled global vector).
"""
import numpy as np

from pcdual.data import SyntheticSpec, gen_synthetic
from pcdual.diffcore import stream
from pcdual.encoders import DualEncoder, standard_config

cloud = gen_synthetic(SyntheticSpec(0, 1, 512), stream(0, "demo")).samples[0].cloud
x = cloud.features[None]

cls = DualEncoder("cls", standard_config(512), seed=0).eval()
print("classification representation (both branches):", cls.represent(x).shape)
print("embedding pairs for the contrastive loss:", cls.embed_pairs(x, x).shape)

seg = DualEncoder("seg", standard_config(512), seed=0).eval()
print("segmentation representation:", seg.represent(x).shape)

# branch 1 ignores point order
perm = np.random.default_rng(0).permutation(512)
h = cls.branch1(x).values
print("branch 1 permutation error:", np.abs(cls.branch1(x[:, perm]).values - h).max())
