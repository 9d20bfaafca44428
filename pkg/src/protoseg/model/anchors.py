"""Anchor grids over pyramid levels.

One scale per level, all aspect ratios at every position, boxes in
normalized center form (cx, cy, w, h). Defaults are the
differential-evolution-optimized values
scales [0.435, 0.502, 0.578, 0.664, 0.762] and
ratios [0.267, 0.554, 1.0, 1.804, 3.746].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

DEFAULT_SCALES = (0.435, 0.502, 0.578, 0.664, 0.762)
DEFAULT_RATIOS = (0.267, 0.554, 1.0, 1.804, 3.746)


@dataclass(frozen=True)
class AnchorSet:
    """All anchors for one input size, flattened level-major."""

    scales: tuple[float, ...]
    ratios: tuple[float, ...]
    boxes: np.ndarray  # (N, 4) float64, (cx, cy, w, h) normalized
    level_slices: tuple[tuple[int, int], ...]  # [start, stop) per level

    def __len__(self) -> int:
        return self.boxes.shape[0]


def generate_anchors(
    level_shapes: list[tuple[int, int]],
    scales=DEFAULT_SCALES,
    ratios=DEFAULT_RATIOS,
) -> AnchorSet:
    """Lay one anchor per (position, ratio) on each level.

    The anchor at position (i, j) of level l with ratio r has center
    ((j + 0.5) / W_l, (i + 0.5) / H_l), width scale_l * sqrt(r) and height
    scale_l / sqrt(r).
    """
    scales = tuple(float(s) for s in scales)
    ratios = tuple(float(r) for r in ratios)
    if len(scales) != len(level_shapes):
        raise ConfigError(
            f"{len(level_shapes)} levels need {len(level_shapes)} scales, got {len(scales)}"
        )
    if any(s <= 0 for s in scales):
        raise ConfigError(f"scales must be positive, got {scales}")
    if any(r <= 0 for r in ratios):
        raise ConfigError(f"ratios must be positive, got {ratios}")

    chunks = []
    slices = []
    start = 0
    for (h, w), scale in zip(level_shapes, scales):
        ys, xs = np.mgrid[0:h, 0:w]
        cx = (xs + 0.5) / w
        cy = (ys + 0.5) / h
        per_pos = []
        for r in ratios:
            bw = scale * math.sqrt(r)
            bh = scale / math.sqrt(r)
            per_pos.append(
                np.stack(
                    [cx, cy, np.full_like(cx, bw, dtype=np.float64), np.full_like(cy, bh, dtype=np.float64)],
                    axis=-1,
                )
            )
        level = np.stack(per_pos, axis=2).reshape(-1, 4)  # (H*W*len(ratios), 4)
        chunks.append(level)
        slices.append((start, start + level.shape[0]))
        start += level.shape[0]
    boxes = np.concatenate(chunks, axis=0).astype(np.float64)
    return AnchorSet(scales=scales, ratios=ratios, boxes=boxes, level_slices=tuple(slices))
