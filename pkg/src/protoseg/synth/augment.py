"""Photometric and affine training-time augmentation.

Photometric ops touch pixel values only and clamp to [0, 1]; masks are never
altered. Affine ops (scale, crop, mirror) apply the identical index transform
to the image and every instance mask, recompute boxes from the transformed
masks, and drop instances whose mask vanishes. Sampling identity ranges
leaves frames bit-identical, which the trainer relies on when augmentation
is disabled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..seeding import rng_for
from ..data.types import MIN_IMAGE_SIDE, FrameRecord, InstanceAnnotation, mask_to_bbox


@dataclass(frozen=True)
class AugmentConfig:
    """Sampling ranges; identity defaults leave frames untouched."""

    contrast: tuple[float, float] = (1.0, 1.0)
    saturation: tuple[float, float] = (1.0, 1.0)
    hue: tuple[float, float] = (0.0, 0.0)
    brightness: tuple[float, float] = (0.0, 0.0)
    noise_sigma: float = 0.0
    scale: tuple[float, float] = (1.0, 1.0)
    crop: tuple[float, float] = (1.0, 1.0)
    mirror_prob: float = 0.0

    def validate(self) -> None:
        for name in ("contrast", "saturation", "hue", "brightness", "scale", "crop"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"augment range {name} has min {lo} > max {hi}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0.0 <= self.mirror_prob <= 1.0:
            raise ConfigError(f"mirror_prob {self.mirror_prob} outside [0, 1]")
        if self.crop[0] <= 0.0:
            raise ConfigError(f"crop fraction must be positive, got {self.crop[0]}")
        if self.scale[0] <= 0.0:
            raise ConfigError(f"scale must be positive, got {self.scale[0]}")


def _hue_matrix(angle: float) -> np.ndarray:
    """Rotation about the gray diagonal of RGB space."""
    c, s = math.cos(angle), math.sin(angle)
    third = (1.0 - c) / 3.0
    sq = math.sqrt(1.0 / 3.0) * s
    return np.array(
        [
            [c + third, third - sq, third + sq],
            [third + sq, c + third, third - sq],
            [third - sq, third + sq, c + third],
        ]
    )


def apply_photometric(image: np.ndarray, params: AugmentConfig, seed: int) -> np.ndarray:
    """Contrast, saturation, hue, brightness and noise with [0, 1] clamping.

    Ops whose sampled parameter equals the identity are skipped outright so
    identity ranges reproduce the input bit for bit.
    """
    params.validate()
    rng = rng_for(seed, "photo")
    out = image.copy()

    contrast = float(rng.uniform(*params.contrast))
    saturation = float(rng.uniform(*params.saturation))
    hue = float(rng.uniform(*params.hue))
    brightness = float(rng.uniform(*params.brightness))

    if contrast != 1.0:
        mean = out.mean()
        out = (out - mean) * contrast + mean
    if saturation != 1.0:
        gray = out @ np.array([0.299, 0.587, 0.114])
        out = gray[:, :, None] + (out - gray[:, :, None]) * saturation
    if hue != 0.0:
        out = out @ _hue_matrix(hue).T
    if brightness != 0.0:
        out = out + brightness
    if params.noise_sigma > 0.0:
        sigma = float(rng.uniform(0.0, params.noise_sigma))
        if sigma > 0.0:
            out = out + rng.normal(0.0, sigma, size=out.shape)
    return np.clip(out, 0.0, 1.0)


def _resize_nearest(arr: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor resize; keeps image and masks perfectly aligned."""
    h, w = arr.shape[:2]
    th, tw = target
    rows = np.minimum((np.floor((np.arange(th) + 0.5) * h / th)).astype(int), h - 1)
    cols = np.minimum((np.floor((np.arange(tw) + 0.5) * w / tw)).astype(int), w - 1)
    return arr[rows][:, cols]


def apply_affine(frame: FrameRecord, params: AugmentConfig, seed: int) -> FrameRecord:
    """Scale, random crop and mirror applied identically to image and masks."""
    params.validate()
    rng = rng_for(seed, "affine")
    h, w = frame.image.shape[:2]

    scale = float(rng.uniform(*params.scale))
    crop_frac = float(rng.uniform(*params.crop))
    mirror = bool(rng.random() < params.mirror_prob)

    image = frame.image
    masks = [inst.mask for inst in frame.instances]
    ids = [inst.instance_id for inst in frame.instances]

    if scale != 1.0:
        th = max(int(round(h * scale)), MIN_IMAGE_SIDE)
        tw = max(int(round(w * scale)), MIN_IMAGE_SIDE)
        image = _resize_nearest(image, (th, tw))
        masks = [_resize_nearest(m, (th, tw)) for m in masks]
        h, w = th, tw

    if crop_frac != 1.0:
        ch = int(round(h * crop_frac))
        cw = int(round(w * crop_frac))
        if ch < 1 or cw < 1:
            raise ConfigError(f"crop fraction {crop_frac} produces an empty image")
        ch, cw = max(ch, MIN_IMAGE_SIDE), max(cw, MIN_IMAGE_SIDE)
        ch, cw = min(ch, h), min(cw, w)
        top = int(rng.integers(0, h - ch + 1))
        left = int(rng.integers(0, w - cw + 1))
        image = image[top : top + ch, left : left + cw]
        masks = [m[top : top + ch, left : left + cw] for m in masks]

    if mirror:
        image = image[:, ::-1]
        masks = [m[:, ::-1] for m in masks]

    instances = []
    for instance_id, mask in zip(ids, masks):
        if not mask.any():
            continue  # cropped away entirely
        mask = np.ascontiguousarray(mask)
        instances.append(
            InstanceAnnotation(
                instance_id=instance_id,
                mask=mask,
                bbox=mask_to_bbox(mask),
                area=int(mask.sum()),
            )
        )
    return FrameRecord(
        frame_id=frame.frame_id,
        image=np.ascontiguousarray(image),
        instances=tuple(instances),
        tags=frame.tags,
    )
