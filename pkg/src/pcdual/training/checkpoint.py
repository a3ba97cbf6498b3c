"""Binary checkpoint format.

Layout (all integers little-endian)::

    b"PCDU"  u32 version  u32 tensor_count
    per tensor: u16 name_len, name (UTF-8), u8 rank, u32 dim * rank,
                float32 values, row-major
    footer:     32-byte config hash, u32 epoch
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from .optim import OptimizerState

MAGIC = b"PCDU"
VERSION = 1
HASH_BYTES = 32


@dataclass
class Checkpoint:
    tensors: dict[str, np.ndarray]
    config_hash: bytes = b"\x00" * HASH_BYTES
    epoch: int = 0
    version: int = VERSION


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    if len(ckpt.config_hash) != HASH_BYTES:
        raise CheckpointError(f"config hash must be {HASH_BYTES} bytes")
    out = [MAGIC, struct.pack("<II", ckpt.version, len(ckpt.tensors))]
    for name, value in ckpt.tensors.items():
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(value, dtype="<f4")
        out.append(struct.pack("<H", len(raw)))
        out.append(raw)
        out.append(struct.pack("<B", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.tobytes())
    out.append(ckpt.config_hash)
    out.append(struct.pack("<I", ckpt.epoch))
    return b"".join(out)


def decode_checkpoint(blob: bytes) -> Checkpoint:
    view = memoryview(blob)
    pos = 0

    def take(size: int, what: str):
        nonlocal pos
        if pos + size > len(view):
            raise CheckpointError(f"truncated checkpoint while reading {what}")
        chunk = view[pos:pos + size]
        pos += size
        return chunk

    magic = bytes(take(4, "magic"))
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}; expected {MAGIC!r}")
    version, count = struct.unpack("<II", take(8, "header"))
    if version != VERSION:
        raise CheckpointError(f"unknown checkpoint version {version}; this build reads version {VERSION}")
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        name = bytes(take(name_len, "name")).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1, "rank"))
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "dims"))
        size = int(np.prod(dims)) if rank else 1
        data = np.frombuffer(take(4 * size, f"values of {name}"), dtype="<f4")
        tensors[name] = data.reshape(dims).astype(np.float32)
    config_hash = bytes(take(HASH_BYTES, "config hash"))
    (epoch,) = struct.unpack("<I", take(4, "epoch"))
    if pos != len(view):
        raise CheckpointError(f"{len(view) - pos} unexpected trailing bytes")
    return Checkpoint(tensors, config_hash, epoch, version)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode_checkpoint(ckpt))
    tmp.replace(path)


def load_checkpoint(path) -> Checkpoint:
    return decode_checkpoint(Path(path).read_bytes())


# ---------------------------------------------------------------- model/optimizer packing

def pack(model_state: dict[str, np.ndarray], optimizer: OptimizerState | None = None) -> dict[str, np.ndarray]:
    tensors = dict(model_state)
    if optimizer is not None:
        for name, m in optimizer.m.items():
            tensors[f"optim.m.{name}"] = m
            tensors[f"optim.v.{name}"] = optimizer.v[name]
        tensors["optim.step"] = np.array([optimizer.step], dtype=np.float32)
    return tensors


def unpack(tensors: dict[str, np.ndarray], optimizer: OptimizerState | None = None) -> dict[str, np.ndarray]:
    """Split ``tensors`` into the model state; fill ``optimizer`` if given."""
    model = {k: v for k, v in tensors.items() if not k.startswith("optim.")}
    if optimizer is not None and "optim.step" in tensors:
        optimizer.step = int(tensors["optim.step"][0])
        optimizer.m = {k[len("optim.m."):]: v.copy() for k, v in tensors.items() if k.startswith("optim.m.")}
        optimizer.v = {k[len("optim.v."):]: v.copy() for k, v in tensors.items() if k.startswith("optim.v.")}
    return model
