"""Deterministic, labeled random streams.

Every consumer of randomness draws from a stream named by a string label
(e.g. ``"gumbel/epoch=17"``). Streams derive from a master seed plus the
SHA-256 of the label, so adding a new consumer never perturbs existing
streams and any stage can be replayed in isolation.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .tensor import Tensor

_MASK64 = (1 << 64) - 1


def label_entropy(label: str) -> list[int]:
    """First 128 bits of sha256(label) as four little-endian uint32 words."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def seed_for(master_seed: int, label: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed) & _MASK64, *label_entropy(label)])


def stream(master_seed: int, label: str) -> np.random.Generator:
    """A fresh PCG64 generator for (master_seed, label); same pair, same draws."""
    return np.random.Generator(np.random.PCG64(seed_for(master_seed, label)))


class RngHub:
    """Hands out labeled streams under one master seed."""

    def __init__(self, master_seed: int, prefix: str = ""):
        self.master_seed = int(master_seed)
        self.prefix = prefix

    def stream(self, label: str) -> np.random.Generator:
        return stream(self.master_seed, self.prefix + label)

    def scoped(self, prefix: str) -> "RngHub":
        """A hub whose labels are all nested under ``prefix + '/'``."""
        return RngHub(self.master_seed, f"{self.prefix}{prefix}/")


def gumbel_noise(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Standard Gumbel(0, 1) samples with the uniform clamped away from {0, 1}."""
    u = np.clip(rng.random((rows, cols)), 1e-12, 1.0 - 1e-12)
    return -np.log(-np.log(u))


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   rows: int | None = None, cols: int | None = None) -> Tensor:
    """Glorot/Xavier uniform init; matrix shape defaults to (fan_in, fan_out)."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    shape = (fan_in if rows is None else rows, fan_out if cols is None else cols)
    return Tensor(rng.uniform(-limit, limit, size=shape), requires_grad=True)
