"""
Metrics and checkpoints
=======================

Per-class accuracy, F1 on the aneurysm class and IoU per class, followed
by a checkpoint round trip through the binary format.
"""
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np

from pcdual.metrics import classification_report, segmentation_report
from pcdual.training import Checkpoint, load_checkpoint, save_checkpoint

print(classification_report([0, 1, 1, 1, 0, 0], [0, 0, 1, 1, 0, 1]).to_table())
print()
print(segmentation_report([[0, 0, 1, 1]], [[0, 1, 1, 1]]).to_table())

weights = {"layer.weight": np.arange(6, dtype=np.float32).reshape(2, 3)}
with TemporaryDirectory() as tmp:
    path = Path(tmp) / "model.ckpt"
    save_checkpoint(Checkpoint(weights, b"\x00" * 32, epoch=12), path)
    back = load_checkpoint(path)
    print(f"\n{path.stat().st_size} bytes, epoch {back.epoch}, bit-identical:",
          back.tensors["layer.weight"].tobytes() == weights["layer.weight"].tobytes())
