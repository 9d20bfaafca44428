"""Dataset construction and directory layout for generated corpora.

A saved dataset directory looks like::

    images/<frame_id>.png     8-bit RGB frames
    masks/<frame_id>.png      single-channel instance-id masks
    annotations.json          COCO-style file from the data package

Frames receive sequential ids and per-frame seeds spawned from the dataset
seed, so generation is reproducible and order-independent.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from ..data.coco import export_coco, read_id_mask_png, write_id_mask_png
from ..data.types import DatasetManifest, FrameRecord, InstanceAnnotation, mask_to_bbox
from .augment import AugmentConfig, apply_affine, apply_photometric
from .scene import SceneConfig, generate_scene


def _frame_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1)[0])


def build_dataset(
    scene_config: SceneConfig,
    augment_config: AugmentConfig | None,
    n: int,
    seed: int,
) -> DatasetManifest:
    """Generate ``n`` frames; augmentation applies only when a config is given."""
    if n < 1:
        raise ValueError(f"need n >= 1 frames, got {n}")
    frames = []
    for i in range(n):
        fseed = _frame_seed(seed, i)
        frame = generate_scene(scene_config, fseed, frame_id=f"{i:05d}")
        if augment_config is not None:
            image = apply_photometric(frame.image, augment_config, fseed)
            frame = FrameRecord(
                frame_id=frame.frame_id,
                image=image,
                instances=frame.instances,
                tags=frame.tags,
            )
            frame = apply_affine(frame, augment_config, fseed)
        frames.append(frame)
    return DatasetManifest(frames=tuple(frames))


def save_dataset(manifest: DatasetManifest, directory) -> None:
    """Write frames, id masks and the COCO-style annotation file."""
    directory = Path(directory)
    (directory / "images").mkdir(parents=True, exist_ok=True)
    (directory / "masks").mkdir(parents=True, exist_ok=True)
    for frame in manifest.frames:
        rgb = np.clip(np.round(frame.image * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(rgb, mode="RGB").save(directory / "images" / f"{frame.frame_id}.png")
        write_id_mask_png(directory / "masks" / f"{frame.frame_id}.png", frame.id_mask)
    export_coco(manifest, directory / "annotations.json")


def load_dataset(directory) -> DatasetManifest:
    """Read a saved dataset back (images quantized to 8 bits on save)."""
    directory = Path(directory)
    frames = []
    for img_path in sorted((directory / "images").glob("*.png")):
        frame_id = img_path.stem
        with Image.open(img_path) as img:
            image = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
        id_mask = read_id_mask_png(directory / "masks" / f"{frame_id}.png")
        instances = []
        for instance_id in np.unique(id_mask):
            if instance_id == 0:
                continue
            mask = id_mask == instance_id
            instances.append(
                InstanceAnnotation(
                    instance_id=int(instance_id),
                    mask=mask,
                    bbox=mask_to_bbox(mask),
                    area=int(mask.sum()),
                )
            )
        frames.append(
            FrameRecord(frame_id=frame_id, image=image, instances=tuple(instances))
        )
    return DatasetManifest(frames=tuple(frames))
