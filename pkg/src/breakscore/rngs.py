"""Seed derivation: every source of randomness descends from one global seed.

A stream is identified by (global_seed, label); labels are hashed through
numpy's SeedSequence so streams are independent and reproducible.
"""
from __future__ import annotations

import zlib

import numpy as np


def derive_seed(global_seed: int, label: str) -> int:
    """Stable 63-bit child seed for a named stream."""
    key = zlib.crc32(label.encode("utf-8"))
    ss = np.random.SeedSequence(entropy=int(global_seed) & (2**64 - 1), spawn_key=(key,))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def make_rng(global_seed: int, label: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(global_seed, label))
