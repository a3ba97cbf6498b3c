"""
Pretrain, train a head, evaluate
================================

The whole pipeline at desk scale: synthetic vessels, contrastive
pretraining on the unlabeled pool, a classifier on frozen features and
metrics on held-out clouds. Runs in about a minute.
"""
import numpy as np

from pcdual.data import SyntheticSpec, gen_synthetic, split_dataset
from pcdual.diffcore import stream
from pcdual.training import RunConfig, evaluate, pretrain, train_downstream

config = RunConfig(points=64, allow_any_points=True, batch_size=4, epochs=20, downstream_epochs=100,
                   n1_levels=(32, 16), k_levels=(8, 8), test_fraction=0.25, seed=0)
data = gen_synthetic(SyntheticSpec(12, 12, 128), stream(0, "synthetic"))
unlabeled, labeled, test = split_dataset(data, config.split_spec())
pool = data.subset(np.sort(np.concatenate([unlabeled, labeled])))
print(f"{len(pool)} clouds for pretraining, {len(test)} held out")

pre = pretrain(pool, config)
print("contrastive loss by epoch:", " ".join(f"{x:.3f}" for x in pre.losses[::4]))

head = train_downstream(pre.model, data.subset(labeled), config)
print(f"head loss: first {head.losses[0]:.3f}, last {head.losses[-1]:.3f}")

print(evaluate(pre.model, head.model, data.subset(test), config).to_table())
