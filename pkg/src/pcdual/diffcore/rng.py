"""Counter-based random streams keyed by (seed, purpose, epoch, sample)."""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream.

    The same ``(seed, stream_key)`` always yields the same draws, whatever
    order streams are created or consumed in, because each one seeds its own
    Philox counter generator.
    """

    seed: int
    stream_key: tuple = ("default", 0, 0)

    def generator(self) -> np.random.Generator:
        purpose, epoch, sample = self.stream_key
        tag = zlib.crc32(str(purpose).encode("utf-8"))
        seq = np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, tag, int(epoch), int(sample)])
        return np.random.Generator(np.random.Philox(seq))

    def child(self, purpose: str, epoch: int = 0, sample: int = 0) -> "RngStream":
        return RngStream(self.seed, (purpose, epoch, sample))


def stream(seed: int, purpose: str, epoch: int = 0, sample: int = 0) -> np.random.Generator:
    return RngStream(seed, (purpose, epoch, sample)).generator()
