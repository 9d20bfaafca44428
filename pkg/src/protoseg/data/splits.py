"""Corpus filtering and train/val splitting."""

from __future__ import annotations

import math

from ..errors import ConfigError, EmptyCorpusError
from ..seeding import rng_for
from .types import DatasetManifest, FrameRecord


def filter_empty_frames(manifest: DatasetManifest) -> DatasetManifest:
    """Drop frames without instances, preserving order."""
    kept = tuple(f for f in manifest.frames if f.instances)
    return DatasetManifest(frames=kept)


def split_train_val(
    manifest: DatasetManifest, fraction: float, seed: int
) -> tuple[DatasetManifest, DatasetManifest]:
    """Shuffle frames with the seeded stream and split at round(fraction * N).

    Rounding is half-up, so 0.85 of 4987 frames gives 4239 train and 748 val.
    """
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"split fraction must be in (0, 1], got {fraction}")
    frames = list(manifest.frames)
    if not frames:
        raise EmptyCorpusError("cannot split an empty manifest")
    rng = rng_for(seed, "split")
    order = rng.permutation(len(frames))
    shuffled: list[FrameRecord] = [frames[i] for i in order]
    n_train = int(math.floor(fraction * len(frames) + 0.5))
    train = DatasetManifest(frames=tuple(shuffled[:n_train]))
    val = DatasetManifest(frames=tuple(shuffled[n_train:]))
    return train, val
