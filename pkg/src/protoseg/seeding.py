"""Seed derivation and deterministic-mode helpers.

Every stochastic entry point takes an integer seed and derives independent
per-item streams with ``np.random.SeedSequence`` spawn keys, so parallel and
serial execution over items draw identical numbers.
"""

import os
import zlib

import numpy as np

DETERMINISTIC_ENV = "PROTOSEG_DETERMINISTIC"


def deterministic_mode() -> bool:
    """True when PROTOSEG_DETERMINISTIC=1 forces single-threaded determinism."""
    return os.environ.get(DETERMINISTIC_ENV, "") == "1"


def _key_part(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def rng_for(seed: int, *key) -> np.random.Generator:
    """Generator for stream ``key`` derived from ``seed``.

    Key parts may be ints or short strings (hashed via crc32);
    ``rng_for(seed, a)`` and ``rng_for(seed, b)`` are independent for a != b
    and the same (seed, key) always yields the same stream.
    """
    parts = tuple(_key_part(p) for p in key)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=parts))


def seed_torch(seed: int) -> None:
    """Seed torch's global RNG and pin it to one thread in deterministic mode."""
    import torch

    torch.manual_seed(seed)
    if deterministic_mode():
        torch.set_num_threads(1)
