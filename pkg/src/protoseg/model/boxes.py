"""Box parameterization between anchors and regression targets.

Offsets follow the SSD convention without variance scaling:
dx = (cx_gt - cx_a) / w_a, dy likewise, dw = ln(w_gt / w_a), dh likewise.
All boxes are normalized to [0, 1] image coordinates.
"""

from __future__ import annotations

import numpy as np

# keeps exp() finite on untrained network outputs; anything this extreme is
# a degenerate prediction anyway
_MAX_LOG_SIZE = 12.0


def centers_to_boxes(centers: np.ndarray) -> np.ndarray:
    """(cx, cy, w, h) -> (x1, y1, x2, y2)."""
    centers = np.asarray(centers, dtype=np.float64)
    half = centers[..., 2:4] / 2.0
    return np.concatenate([centers[..., 0:2] - half, centers[..., 0:2] + half], axis=-1)


def boxes_to_centers(boxes: np.ndarray) -> np.ndarray:
    """(x1, y1, x2, y2) -> (cx, cy, w, h)."""
    boxes = np.asarray(boxes, dtype=np.float64)
    wh = boxes[..., 2:4] - boxes[..., 0:2]
    return np.concatenate([boxes[..., 0:2] + wh / 2.0, wh], axis=-1)


def encode_boxes(gt_centers: np.ndarray, anchor_centers: np.ndarray) -> np.ndarray:
    """Regression targets for ground-truth boxes against their anchors."""
    gt = np.asarray(gt_centers, dtype=np.float64)
    an = np.asarray(anchor_centers, dtype=np.float64)
    dxy = (gt[..., 0:2] - an[..., 0:2]) / an[..., 2:4]
    dwh = np.log(gt[..., 2:4] / an[..., 2:4])
    return np.concatenate([dxy, dwh], axis=-1)


def decode_boxes(deltas: np.ndarray, anchor_centers: np.ndarray) -> np.ndarray:
    """Inverse of encode_boxes; zero deltas return the anchor exactly."""
    d = np.asarray(deltas, dtype=np.float64)
    an = np.asarray(anchor_centers, dtype=np.float64)
    cxy = an[..., 0:2] + d[..., 0:2] * an[..., 2:4]
    wh = an[..., 2:4] * np.exp(np.clip(d[..., 2:4], -_MAX_LOG_SIZE, _MAX_LOG_SIZE))
    return np.concatenate([cxy, wh], axis=-1)
