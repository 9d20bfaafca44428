"""Anchor to ground-truth assignment.

An anchor is positive when its best IoU is >= pos_thr (label = index of that
ground-truth box), negative when its best IoU is < neg_thr, ignored in
between. The best anchor for each ground-truth box is forced positive, so
every box trains at least one anchor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..model.boxes import boxes_to_centers, centers_to_boxes, encode_boxes

NEGATIVE = -1
IGNORED = -2


@dataclass(frozen=True)
class MatchResult:
    labels: np.ndarray  # (N,) int64: gt index, NEGATIVE or IGNORED
    deltas: np.ndarray  # (N, 4) float64, encoded targets (zero for non-positives)

    @property
    def positive(self) -> np.ndarray:
        return self.labels >= 0

    @property
    def negative(self) -> np.ndarray:
        return self.labels == NEGATIVE


def match_anchors(
    anchor_centers: np.ndarray,
    gt_corner_boxes: np.ndarray,
    pos_thr: float = 0.5,
    neg_thr: float = 0.4,
) -> MatchResult:
    """Assign anchors (cx, cy, w, h form) to ground-truth corner boxes."""
    if pos_thr < neg_thr:
        raise ValueError(f"pos_thr {pos_thr} must be >= neg_thr {neg_thr}")
    anchor_centers = np.asarray(anchor_centers, dtype=np.float64)
    n = anchor_centers.shape[0]
    gt = np.asarray(gt_corner_boxes, dtype=np.float64).reshape(-1, 4)
    if gt.shape[0] == 0:
        return MatchResult(
            labels=np.full(n, NEGATIVE, dtype=np.int64),
            deltas=np.zeros((n, 4), dtype=np.float64),
        )

    anchor_corners = centers_to_boxes(anchor_centers)
    iou = kernels.box_iou_matrix(anchor_corners, gt)  # (N, M)
    best_gt = iou.argmax(axis=1)
    best_iou = iou[np.arange(n), best_gt]

    labels = np.full(n, IGNORED, dtype=np.int64)
    labels[best_iou < neg_thr] = NEGATIVE
    pos = best_iou >= pos_thr
    labels[pos] = best_gt[pos]

    # force the best anchor per ground truth (ties to the lower anchor index)
    best_anchor = iou.argmax(axis=0)
    labels[best_anchor] = np.arange(gt.shape[0])

    deltas = np.zeros((n, 4), dtype=np.float64)
    positive = labels >= 0
    if positive.any():
        gt_centers = boxes_to_centers(gt[labels[positive]])
        deltas[positive] = encode_boxes(gt_centers, anchor_centers[positive])
    return MatchResult(labels=labels, deltas=deltas)
