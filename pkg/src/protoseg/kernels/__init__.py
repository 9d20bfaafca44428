"""Per-pixel geometry kernels with backend selection.

The compiled Cython extension is preferred when it built; otherwise the
numpy fallback is used. Selection happens once at import, but tests and the
kernel benchmark can switch explicitly with :func:`use_backend`. Setting
``PROTOSEG_PURE_PY=1`` forces the fallback for a whole process.

All functions normalize their inputs here so both backends see identical
dtypes: masks as C-contiguous uint8, boxes as C-contiguous float64.
"""

import os

import numpy as np

from . import numpy_impl

try:
    from . import _fast
except ImportError:
    _fast = None

_backend = numpy_impl if (_fast is None or os.environ.get("PROTOSEG_PURE_PY") == "1") else _fast


def active_backend() -> str:
    return _backend.name


def available_backends():
    return ("numpy",) if _fast is None else ("compiled", "numpy")


def use_backend(name: str) -> None:
    """Switch backend by name ('compiled' or 'numpy'); raises if unavailable."""
    global _backend
    if name == "numpy":
        _backend = numpy_impl
    elif name == "compiled":
        if _fast is None:
            raise RuntimeError("compiled kernel extension is not available")
        _backend = _fast
    else:
        raise ValueError(f"unknown kernel backend {name!r}")


def _as_mask(m) -> np.ndarray:
    return np.ascontiguousarray(m, dtype=np.uint8)


def _as_boxes(b) -> np.ndarray:
    arr = np.ascontiguousarray(b, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"expected (n, 4) boxes, got shape {arr.shape}")
    return arr


def intersection_count(a, b) -> int:
    return int(_backend.intersection_count(_as_mask(a), _as_mask(b)))


def boundary(mask) -> np.ndarray:
    """Boolean map of set pixels 4-adjacent to an unset or out-of-bounds pixel."""
    return _backend.boundary(_as_mask(mask)).astype(bool)


def tolerance_match_counts(boundary_a, boundary_b, tau: float):
    """(a pixels within tau of b, b pixels within tau of a), Euclidean."""
    return _backend.tolerance_match_counts(_as_mask(boundary_a), _as_mask(boundary_b), float(tau))


def box_iou_matrix(boxes_a, boxes_b) -> np.ndarray:
    return _backend.box_iou_matrix(_as_boxes(boxes_a), _as_boxes(boxes_b))


def greedy_nms(boxes, scores, iou_threshold: float) -> np.ndarray:
    """Indices kept by greedy descending-score suppression at IoU > threshold.

    Score ties are broken toward the lower index. Returned in keep order.
    """
    boxes = _as_boxes(boxes)
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    if len(scores) != len(boxes):
        raise ValueError("boxes and scores length mismatch")
    if len(boxes) == 0:
        return np.zeros(0, dtype=np.int64)
    return _backend.greedy_nms(boxes, scores, float(iou_threshold))


def pair_intersection_counts(a_ids, b_ids, num_a: int, num_b: int) -> np.ndarray:
    a = np.ascontiguousarray(a_ids, dtype=np.int64)
    b = np.ascontiguousarray(b_ids, dtype=np.int64)
    if a.shape != b.shape:
        raise ValueError("instance-id maps must share a shape")
    return _backend.pair_intersection_counts(a, b, int(num_a), int(num_b))
