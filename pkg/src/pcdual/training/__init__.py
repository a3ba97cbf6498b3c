"""Optimizer, schedule, checkpoints and the training loops."""
from .checkpoint import Checkpoint, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from .config import RunConfig, load_config, parse_config
from .loops import build_encoder, build_head, evaluate, pretrain, train_downstream
from .optim import OptimizerState, adam_step, lr_at

__all__ = [
    "Checkpoint", "OptimizerState", "RunConfig", "adam_step", "build_encoder", "build_head", "decode_checkpoint",
    "encode_checkpoint", "evaluate", "load_checkpoint", "load_config", "lr_at", "parse_config", "pretrain", "save_checkpoint",
    "train_downstream",
]
