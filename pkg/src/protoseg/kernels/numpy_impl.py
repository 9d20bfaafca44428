"""Numpy fallback implementations of the per-pixel kernels.

Semantics must match ``_fast`` exactly; the test suite runs both backends
against the same oracles and against each other.
"""

import numpy as np
from scipy import ndimage

name = "numpy"


def intersection_count(a, b):
    return int(np.count_nonzero(np.logical_and(a, b)))


def boundary(mask):
    """Set pixels 4-adjacent to an unset or out-of-bounds pixel."""
    m = mask.astype(bool)
    p = np.pad(m, 1, constant_values=False)
    surrounded = p[:-2, 1:-1] & p[2:, 1:-1] & p[1:-1, :-2] & p[1:-1, 2:]
    return (m & ~surrounded).astype(np.uint8)


def tolerance_match_counts(boundary_a, boundary_b, tau):
    """Count boundary pixels of each side within Euclidean distance tau of the other.

    Returns (a_near_b, b_near_a). Distance to an empty boundary is infinite.
    """
    ba = boundary_a.astype(bool)
    bb = boundary_b.astype(bool)
    limit = tau * tau + 1e-6
    if not bb.any():
        a_near_b = 0
    else:
        dist_b = ndimage.distance_transform_edt(~bb)
        a_near_b = int(np.count_nonzero(ba & (dist_b * dist_b <= limit)))
    if not ba.any():
        b_near_a = 0
    else:
        dist_a = ndimage.distance_transform_edt(~ba)
        b_near_a = int(np.count_nonzero(bb & (dist_a * dist_a <= limit)))
    return a_near_b, b_near_a


def box_iou_matrix(boxes_a, boxes_b):
    """Pairwise IoU of continuous (x1, y1, x2, y2) boxes."""
    a = boxes_a[:, None, :]
    b = boxes_b[None, :, :]
    iw = np.clip(np.minimum(a[..., 2], b[..., 2]) - np.maximum(a[..., 0], b[..., 0]), 0.0, None)
    ih = np.clip(np.minimum(a[..., 3], b[..., 3]) - np.maximum(a[..., 1], b[..., 1]), 0.0, None)
    inter = iw * ih
    area_a = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
    area_b = (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])
    union = area_a + area_b - inter
    out = np.zeros(inter.shape, dtype=np.float64)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def greedy_nms(boxes, scores, iou_threshold):
    """Greedy suppression over boxes visited in ``order``; see kernels.nms."""
    n = len(boxes)
    order = np.lexsort((np.arange(n), -scores))
    suppressed = np.zeros(n, dtype=bool)
    keep = []
    for idx in order:
        if suppressed[idx]:
            continue
        keep.append(idx)
        rest = order[~suppressed[order]]
        ious = box_iou_matrix(boxes[idx][None, :], boxes[rest])[0]
        suppressed[rest[ious > iou_threshold]] = True
        suppressed[idx] = True
    return np.asarray(keep, dtype=np.int64)


def pair_intersection_counts(a_ids, b_ids, num_a, num_b):
    """Joint histogram of two instance-id maps (id 0 = background).

    Returns an (num_a + 1, num_b + 1) int64 matrix whose [i, j] entry is the
    number of pixels labeled i in ``a_ids`` and j in ``b_ids``.
    """
    joint = a_ids.astype(np.int64) * (num_b + 1) + b_ids.astype(np.int64)
    counts = np.bincount(joint.ravel(), minlength=(num_a + 1) * (num_b + 1))
    return counts.reshape(num_a + 1, num_b + 1)
