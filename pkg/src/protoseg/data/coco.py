"""COCO-style annotation files and instance-id PNG masks.

The JSON layout follows the usual COCO skeleton: ``images`` entries carry
(id, file_name, height, width), ``annotations`` carry (id, image_id,
category_id, segmentation, bbox, area, iscrowd) with polygons from
mask_to_contours, and ``categories`` holds the single "instrument" class.
Each annotation also records its per-frame ``instance_id`` so a manifest
round-trips losslessly; foreign files without that field fall back to
annotation order within the frame.

bbox uses [x, y, w, h] with w = x_max - x_min + 1 (inclusive corners).

Instance-id PNGs are single-channel images where pixel value v > 0 means
"pixel belongs to instance v".
"""

from __future__ import annotations

import json
import warnings
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import ParseError, ValidationWarning
from .contours import fill_polygons, mask_to_contours
from .types import DatasetManifest, FrameRecord, InstanceAnnotation, mask_to_bbox

CATEGORY = {"id": 1, "name": "instrument"}


def _poly_to_flat(loop) -> list[float]:
    flat: list[float] = []
    for x, y in loop:
        flat.extend((float(x), float(y)))
    return flat


def _flat_to_poly(flat) -> list[tuple[float, float]]:
    if len(flat) % 2 != 0 or len(flat) < 6:
        raise ParseError(
            f"segmentation polygon needs an even number of >= 6 coordinates, got {len(flat)}",
            field="segmentation",
        )
    return [(flat[i], flat[i + 1]) for i in range(0, len(flat), 2)]


def export_coco(manifest: DatasetManifest, path) -> None:
    """Write the manifest's annotations as a COCO-style JSON file."""
    images = []
    annotations = []
    ann_id = 1
    for image_id, frame in enumerate(manifest.frames, start=1):
        h, w = frame.image.shape[:2]
        images.append(
            {
                "id": image_id,
                "file_name": f"{frame.frame_id}.png",
                "height": h,
                "width": w,
            }
        )
        for inst in sorted(frame.instances, key=lambda a: a.instance_id):
            x0, y0, x1, y1 = inst.bbox
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": image_id,
                    "category_id": 1,
                    "instance_id": inst.instance_id,
                    "segmentation": [_poly_to_flat(p) for p in mask_to_contours(inst.mask)],
                    "bbox": [int(x0), int(y0), int(x1 - x0 + 1), int(y1 - y0 + 1)],
                    "area": int(inst.area),
                    "iscrowd": 0,
                }
            )
            ann_id += 1
    doc = {"images": images, "annotations": annotations, "categories": [CATEGORY]}
    Path(path).write_text(json.dumps(doc, indent=1))


def _require(obj: dict, key: str, path, where: str):
    if key not in obj:
        raise ParseError(f"missing '{key}' in {where}", path=str(path), field=key)
    return obj[key]


def import_coco(path) -> DatasetManifest:
    """Rebuild a manifest from a COCO-style file.

    Images are not stored in the file, so frames come back with zero-filled
    pixels; masks, boxes and ids are reconstructed exactly. A stored bbox
    that disagrees with its polygon-filled mask triggers a ValidationWarning
    and the mask-derived box wins.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ParseError(f"no such file: {path}", path=str(path))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}: {exc.msg}", path=str(path))
    if not isinstance(doc, dict):
        raise ParseError("top level must be a JSON object", path=str(path))

    images = _require(doc, "images", path, "top level")
    anns = _require(doc, "annotations", path, "top level")

    by_image: dict[int, list[dict]] = {}
    for ann in anns:
        by_image.setdefault(_require(ann, "image_id", path, "annotation"), []).append(ann)

    frames = []
    for entry in images:
        image_id = _require(entry, "id", path, "image entry")
        file_name = str(_require(entry, "file_name", path, "image entry"))
        h = int(_require(entry, "height", path, "image entry"))
        w = int(_require(entry, "width", path, "image entry"))
        frame_id = file_name[:-4] if file_name.endswith(".png") else file_name
        instances = []
        for order, ann in enumerate(by_image.get(image_id, ()), start=1):
            seg = _require(ann, "segmentation", path, "annotation")
            polys = [_flat_to_poly(flat) for flat in seg]
            mask = fill_polygons(polys, (h, w))
            if not mask.any():
                raise ParseError(
                    f"annotation {ann.get('id')} fills an empty mask",
                    path=str(path),
                    field="segmentation",
                )
            derived = mask_to_bbox(mask)
            bx, by_, bw, bh = (int(v) for v in _require(ann, "bbox", path, "annotation"))
            stored = (bx, by_, bx + bw - 1, by_ + bh - 1)
            if stored != derived:
                warnings.warn(
                    f"frame {frame_id}: stored bbox {stored} disagrees with mask bbox {derived}",
                    ValidationWarning,
                    stacklevel=2,
                )
            instances.append(
                InstanceAnnotation(
                    instance_id=int(ann.get("instance_id", order)),
                    mask=mask,
                    bbox=derived,
                    area=int(mask.sum()),
                )
            )
        frames.append(
            FrameRecord(
                frame_id=frame_id,
                image=np.zeros((h, w, 3), dtype=np.float64),
                instances=tuple(instances),
            )
        )
    return DatasetManifest(frames=tuple(frames))


def write_id_mask_png(path, id_mask: np.ndarray) -> None:
    """Save an integer instance-id map as a single-channel PNG."""
    arr = np.asarray(id_mask)
    if arr.ndim != 2:
        raise ValueError(f"id mask must be 2-d, got shape {arr.shape}")
    if arr.min() < 0:
        raise ValueError("instance ids must be non-negative")
    if arr.max() > 65535:
        raise ValueError(f"instance ids exceed 16-bit PNG range: {arr.max()}")
    if arr.max() <= 255:
        img = Image.fromarray(arr.astype(np.uint8), mode="L")
    else:
        img = Image.fromarray(arr.astype(np.uint16))
    img.save(path)


def read_id_mask_png(path) -> np.ndarray:
    """Load a single-channel instance-id PNG as an int64 map."""
    with Image.open(path) as img:
        arr = np.array(img)
    if arr.ndim != 2:
        raise ParseError(f"expected single-channel mask PNG, got shape {arr.shape}", path=str(path))
    return arr.astype(np.int64)
