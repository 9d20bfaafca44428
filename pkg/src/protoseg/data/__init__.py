from .types import (
    DatasetManifest,
    FrameRecord,
    InstanceAnnotation,
    instance_from_mask,
    mask_to_bbox,
    validate_image,
)
from .contours import fill_polygons, mask_to_contours
from .splits import filter_empty_frames, split_train_val
from .coco import export_coco, import_coco, read_id_mask_png, write_id_mask_png

__all__ = [
    "DatasetManifest",
    "FrameRecord",
    "InstanceAnnotation",
    "instance_from_mask",
    "mask_to_bbox",
    "validate_image",
    "mask_to_contours",
    "fill_polygons",
    "filter_empty_frames",
    "split_train_val",
    "export_coco",
    "import_coco",
    "read_id_mask_png",
    "write_id_mask_png",
]
