"""Core dataset types.

Conventions used everywhere:

- images are float64 arrays of shape (H, W, 3) with values in [0, 1]
- instance masks are boolean arrays of shape (H, W)
- bounding boxes on masks are inclusive integer corners
  (x_min, y_min, x_max, y_max); x indexes columns, y indexes rows
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyMaskError, ShapeError

MIN_IMAGE_SIDE = 8


def validate_image(image: np.ndarray) -> None:
    """Check the (H, W, 3) in-[0,1] image contract; raises ShapeError."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeError(f"image must be (H, W, 3), got {image.shape}")
    if image.shape[0] < MIN_IMAGE_SIDE or image.shape[1] < MIN_IMAGE_SIDE:
        raise ShapeError(f"image sides must be >= {MIN_IMAGE_SIDE}, got {image.shape[:2]}")
    if image.min() < 0.0 or image.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")


def mask_to_bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    """Tight inclusive (x_min, y_min, x_max, y_max) bound of a binary mask.

    Raises EmptyMaskError when no pixel is set.
    """
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        raise EmptyMaskError("cannot compute bbox of an empty mask")
    cols = np.flatnonzero(mask.any(axis=0))
    return int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1])


@dataclass(frozen=True)
class InstanceAnnotation:
    """One instrument instance: binary mask plus derived box and area."""

    instance_id: int
    mask: np.ndarray
    bbox: tuple[int, int, int, int]
    area: int

    def validate(self, frame_shape: tuple[int, int]) -> None:
        if self.instance_id <= 0:
            raise ValueError(f"instance_id must be positive, got {self.instance_id}")
        if self.mask.shape != frame_shape:
            raise ShapeError(f"mask shape {self.mask.shape} != frame shape {frame_shape}")
        if self.area < 1 or self.area != int(np.count_nonzero(self.mask)):
            raise ValueError("area must equal the mask's set-pixel count and be >= 1")
        if self.bbox != mask_to_bbox(self.mask):
            raise ValueError("bbox is not the tight bound of the mask")


def instance_from_mask(instance_id: int, mask: np.ndarray) -> InstanceAnnotation:
    """Build an annotation with bbox and area derived from the mask."""
    mask = np.asarray(mask, dtype=bool)
    return InstanceAnnotation(
        instance_id=instance_id,
        mask=mask,
        bbox=mask_to_bbox(mask),
        area=int(np.count_nonzero(mask)),
    )


@dataclass(frozen=True)
class FrameRecord:
    """An image with its per-instance annotations and generation tags."""

    frame_id: str
    image: np.ndarray
    instances: tuple[InstanceAnnotation, ...] = ()
    tags: frozenset[str] = frozenset()

    def validate(self) -> None:
        validate_image(self.image)
        shape = self.image.shape[:2]
        ids = [inst.instance_id for inst in self.instances]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate instance ids in frame {self.frame_id}: {ids}")
        for inst in self.instances:
            inst.validate(shape)

    @property
    def id_mask(self) -> np.ndarray:
        """Instance-id map: pixel value v > 0 means instance id v, 0 background."""
        out = np.zeros(self.image.shape[:2], dtype=np.int64)
        for inst in self.instances:
            out[inst.mask] = inst.instance_id
        return out


@dataclass(frozen=True)
class DatasetManifest:
    """Ordered frame collection with empty-frame bookkeeping."""

    frames: tuple[FrameRecord, ...]
    counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        total = len(self.frames)
        empty = sum(1 for f in self.frames if not f.instances)
        object.__setattr__(self, "counts", {"total": total, "empty": empty})

    def __len__(self) -> int:
        return len(self.frames)

    def validate(self) -> None:
        for frame in self.frames:
            frame.validate()
