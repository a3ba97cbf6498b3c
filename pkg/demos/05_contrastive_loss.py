"""
NT-Xent on paired embeddings
============================

Rows 2k and 2k+1 are the two views of cloud k. The loss is low when each
row is closest, in cosine terms, to its partner.
"""
import math

import numpy as np

from pcdual.contrastive import EmbeddingBatch, ntxent_loss, pair_probability

aligned = np.array([[1.0, 0], [1, 0], [0, 1], [0, 1]])
print(f"partners aligned, tau 0.5: {float(ntxent_loss(aligned, tau=0.5).values):.6f}"
      f" (closed form {math.log(1 + 2 * math.exp(-2)):.6f})")
print(f"all rows identical:        {float(ntxent_loss(np.ones((4, 3))).values):.6f} (ln 3 = {math.log(3):.6f})")

rng = np.random.default_rng(0)
random = rng.normal(size=(8, 32))
print(f"random embeddings, N = 4:  {float(ntxent_loss(random).values):.4f} (ln 7 = {math.log(7):.4f})")

for tau in (1.0, 0.5, 0.1):
    print(f"tau {tau}: aligned loss {float(ntxent_loss(aligned, tau=tau).values):.4f}")

print("probability row 0 picks its partner:", round(pair_probability(EmbeddingBatch(aligned), 0, 1), 4))
