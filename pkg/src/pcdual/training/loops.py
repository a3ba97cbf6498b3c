"""Contrastive pretraining, downstream head training and evaluation."""
from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..augment import make_pair
from ..contrastive import EmbeddingBatch, ntxent_loss
from ..data import Dataset, sample_points
from ..diffcore import backward, stream
from ..downstream import ClassifierHead, SegmenterHead, classify, cross_entropy, segment
from ..encoders import DualEncoder
from ..errors import CheckpointError
from ..metrics import MetricsReport, classification_report, segmentation_report
from .checkpoint import Checkpoint, pack, unpack
from .config import RunConfig
from .optim import OptimizerState, adam_step, lr_at

log = logging.getLogger(__name__)


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    loss: float
    wall_time: float

    def to_json(self) -> str:
        return json.dumps({"kind": "epoch", "epoch": self.epoch, "lr": self.lr, "loss": self.loss,
                           "wall_time": self.wall_time})


@dataclass
class TrainResult:
    model: object
    optimizer: OptimizerState
    records: list[EpochRecord] = field(default_factory=list)

    @property
    def losses(self) -> list[float]:
        return [r.loss for r in self.records]


def build_encoder(config: RunConfig) -> DualEncoder:
    return DualEncoder(config.task, config.encoder_config(), mode=config.encoder_mode,
                       seed=config.seed, dtype=config.dtype)


def build_head(config: RunConfig, encoder: DualEncoder):
    cls = ClassifierHead if config.task == "cls" else SegmenterHead
    return cls(encoder.representation_width, config.num_classes, seed=config.seed, dtype=config.dtype)


def encoder_checksum(encoder: DualEncoder) -> str:
    digest = hashlib.sha256()
    for name, value in sorted(encoder.state_dict().items()):
        digest.update(name.encode())
        digest.update(np.ascontiguousarray(value).tobytes())
    return digest.hexdigest()


def _param_grads(params) -> dict[str, np.ndarray]:
    return {name: p.grad for name, p in params.items() if p.grad is not None}


def _write_record(sink, line: str) -> None:
    if sink is not None:
        sink.write(line + "\n")
        sink.flush()


def model_checkpoint(model, config: RunConfig, epoch: int, optimizer: OptimizerState | None = None) -> Checkpoint:
    """Heads are stored under ``head.cls.`` / ``head.seg.``; encoder names are used as-is."""
    state = model.state_dict(getattr(model, "checkpoint_prefix", ""))
    return Checkpoint(pack(state, optimizer), config.hash(), epoch)


def restore(model, ckpt: Checkpoint, optimizer: OptimizerState | None = None) -> None:
    state = unpack(ckpt.tensors, optimizer)
    try:
        model.load_state_dict(state, getattr(model, "checkpoint_prefix", ""))
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"checkpoint does not fit this model: {exc}") from None
    if optimizer is not None and "optim.step" not in ckpt.tensors:
        raise CheckpointError("checkpoint carries no optimizer state to resume from")


# ---------------------------------------------------------------- pretraining

def pretrain(pool: Dataset, config: RunConfig, *, resume: Checkpoint | None = None,
             stop_after: int | None = None, records=None,
             on_epoch: Callable[[int, DualEncoder, OptimizerState], None] | None = None) -> TrainResult:
    """Contrastive pretraining of both branches and the projection head.

    Each epoch shuffles ``pool``, forms batches of ``batch_size`` clouds
    (the last incomplete batch is dropped), builds one augmented pair per
    cloud and minimizes NT-Xent over the 2N embeddings. All randomness is
    keyed by ``(seed, purpose, epoch, sample)``, so resuming from a
    checkpoint reproduces the uninterrupted run.
    """
    if len(pool) == 0:
        raise ValueError("pretraining pool is empty")
    encoder = build_encoder(config).train()
    optimizer = OptimizerState(config.base_lr, config.weight_decay_pretrain)
    start = 0
    if resume is not None:
        restore(encoder, resume, optimizer)
        start = resume.epoch
    aug = config.augment_config()
    params = encoder.parameters()
    batch = min(config.batch_size, len(pool))
    end = config.epochs if stop_after is None else min(config.epochs, stop_after)
    result = TrainResult(encoder, optimizer)

    for epoch in range(start, end):
        tic = time.perf_counter()
        lr = lr_at(epoch, config.base_lr, config.lr_step, config.lr_gamma)
        order = stream(config.seed, "shuffle", epoch).permutation(len(pool))
        losses = []
        for lo in range(0, len(order) - batch + 1, batch):
            idx = order[lo:lo + batch]
            if len(idx) < 2:
                log.warning("skipping a batch with a single pair (its loss is identically zero)")
                continue
            views_a, views_b = [], []
            for i in idx:
                cloud = sample_points(pool[i].cloud, config.points, stream(config.seed, "sample", epoch, i))
                pair = make_pair(cloud, aug, stream(config.seed, "view_a", epoch, i),
                                 stream(config.seed, "view_b", epoch, i), source_id=int(i))
                views_a.append(pair.view_a.features)
                views_b.append(pair.view_b.features)
            z = encoder.embed_pairs(np.stack(views_a), np.stack(views_b))
            loss = ntxent_loss(EmbeddingBatch(z, config.tau))
            encoder.zero_grad()
            backward(loss)
            adam_step(params, _param_grads(params), optimizer, lr)
            losses.append(float(loss.values))
        rec = EpochRecord(epoch, lr, float(np.mean(losses)) if losses else float("nan"),
                          time.perf_counter() - tic)
        result.records.append(rec)
        _write_record(records, rec.to_json())
        log.info("pretrain epoch %d lr %.3g loss %.5f", epoch, lr, rec.loss)
        if on_epoch is not None:
            on_epoch(epoch + 1, encoder, optimizer)
    encoder.zero_grad()
    return result


# ---------------------------------------------------------------- downstream

def _sampled(dataset: Dataset, config: RunConfig, purpose: str):
    clouds = [sample_points(s.cloud, config.points, stream(config.seed, purpose, 0, i))
              for i, s in enumerate(dataset.samples)]
    return clouds


def compute_representations(encoder: DualEncoder, clouds, chunk: int = 32) -> np.ndarray:
    encoder.eval()
    out = []
    for lo in range(0, len(clouds), chunk):
        feats = np.stack([c.features for c in clouds[lo:lo + chunk]])
        out.append(encoder.represent(feats))
    return np.concatenate(out, axis=0)


def _targets(dataset: Dataset, clouds, config: RunConfig) -> np.ndarray:
    if config.task == "cls":
        labels = dataset.labels
    else:
        if any(c.labels is None for c in clouds):
            raise ValueError("segmentation needs per-point labels on every cloud")
        labels = np.stack([c.labels for c in clouds])
    if labels.size and (labels.min() < 0 or labels.max() >= config.num_classes):
        raise ValueError(f"labels fall outside the configured {config.num_classes} classes")
    return labels


def _head_forward(head, feats, config: RunConfig):
    return classify(feats, head) if config.task == "cls" else segment(feats, head)


def train_downstream(encoder: DualEncoder, labeled: Dataset, config: RunConfig, *, records=None) -> TrainResult:
    """Train the task head on representations of the frozen encoder."""
    if encoder.task != config.task:
        raise ValueError(f"encoder was built for {encoder.task!r}, config asks for {config.task!r}")
    if len(labeled) == 0:
        raise ValueError("labeled set is empty")
    before = encoder_checksum(encoder)
    clouds = _sampled(labeled, config, "sample-downstream")
    feats = compute_representations(encoder, clouds).astype(config.dtype)
    targets = _targets(labeled, clouds, config)

    head = build_head(config, encoder).train()
    optimizer = OptimizerState(config.base_lr, config.downstream_decay, decoupled=config.decoupled_decay)
    params = head.parameters()
    result = TrainResult(head, optimizer)
    for epoch in range(config.head_epochs):
        tic = time.perf_counter()
        lr = lr_at(epoch, config.base_lr, config.lr_step, config.lr_gamma)
        order = stream(config.seed, "shuffle-downstream", epoch).permutation(len(labeled))
        losses, weights = [], []
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo:lo + config.batch_size]
            loss = cross_entropy(_head_forward(head, feats[idx], config), targets[idx])
            head.zero_grad()
            backward(loss)
            adam_step(params, _param_grads(params), optimizer, lr)
            losses.append(float(loss.values))
            weights.append(len(idx))
        rec = EpochRecord(epoch, lr, float(np.average(losses, weights=weights)), time.perf_counter() - tic)
        result.records.append(rec)
        _write_record(records, rec.to_json())
        log.info("downstream epoch %d lr %.3g loss %.5f", epoch, lr, rec.loss)
    head.zero_grad()
    if encoder_checksum(encoder) != before:
        raise RuntimeError("encoder parameters changed during downstream training")
    return result


def predict(encoder: DualEncoder, head, clouds, config: RunConfig) -> np.ndarray:
    head.eval()
    feats = compute_representations(encoder, clouds).astype(config.dtype)
    return np.argmax(_head_forward(head, feats, config).values, axis=-1)


def evaluate(encoder: DualEncoder, head, test: Dataset, config: RunConfig, *, purpose: str = "sample-eval") -> MetricsReport:
    if len(test) == 0:
        raise ValueError("test set is empty")
    clouds = _sampled(test, config, purpose)
    pred = predict(encoder, head, clouds, config)
    meta = {"config_hash": config.hash().hex(), "seed": config.seed}
    if config.task == "cls":
        return classification_report(pred, test.labels, **meta)
    truths = _targets(test, clouds, config)
    return segmentation_report(list(pred), list(truths), **meta)
