"""The four weighted loss terms.

Defaults follow the 1 / 1.5 / 6.125 / 1 weighting for classification, box
regression, mask assembly and the auxiliary segmentation head. Conventions
the formulas leave open: hard-negative mining at 3:1, and mask BCE
restricted to the ground-truth box and normalized by its area.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch.nn import functional as F


@dataclass(frozen=True)
class LossWeights:
    w_cls: float = 1.0
    w_box: float = 1.5
    w_mask: float = 6.125
    w_seg: float = 1.0

    def validate(self) -> None:
        if min(self.w_cls, self.w_box, self.w_mask, self.w_seg) < 0:
            raise ValueError("loss weights must be >= 0")


def loss_cls(
    logits: torch.Tensor, labels: np.ndarray, neg_pos_ratio: int = 3
) -> torch.Tensor:
    """Softmax CE over positives plus the hardest negatives at 3:1.

    With no positive anchors the hardest min(#negatives, 8) negatives train
    alone. Ignored anchors contribute nothing.
    """
    labels = np.asarray(labels)
    pos_idx = np.flatnonzero(labels >= 0)
    neg_idx = np.flatnonzero(labels == -1)

    per_anchor_target = torch.zeros(logits.shape[0], dtype=torch.long)
    per_anchor_target[torch.from_numpy(pos_idx)] = 1
    ce = F.cross_entropy(logits, per_anchor_target, reduction="none")

    if pos_idx.size > 0:
        n_hard = min(neg_pos_ratio * pos_idx.size, neg_idx.size)
    else:
        n_hard = min(neg_idx.size, 8)
    if neg_idx.size > 0 and n_hard > 0:
        neg_ce = ce[torch.from_numpy(neg_idx)]
        hard = torch.topk(neg_ce, n_hard).indices
        chosen_neg = torch.from_numpy(neg_idx)[hard]
    else:
        chosen_neg = torch.empty(0, dtype=torch.long)
    chosen = torch.cat([torch.from_numpy(pos_idx), chosen_neg])
    if chosen.numel() == 0:
        return logits.sum() * 0.0
    return ce[chosen].mean()


def loss_box(pred_deltas: torch.Tensor, gt_deltas: torch.Tensor) -> torch.Tensor:
    """Smooth-L1 summed over the 4 coordinates, mean over positive anchors."""
    if pred_deltas.numel() == 0:
        return pred_deltas.sum() * 0.0
    diff = pred_deltas - gt_deltas
    absdiff = diff.abs()
    per_elem = torch.where(absdiff < 1.0, 0.5 * diff * diff, absdiff - 0.5)
    return per_elem.sum(dim=-1).mean()


def _box_to_cells(box, h: int, w: int) -> tuple[int, int, int, int]:
    x1, y1, x2, y2 = box
    c_lo = max(int(np.floor(x1 * w)), 0)
    c_hi = min(max(int(np.ceil(x2 * w)), c_lo + 1), w)
    r_lo = max(int(np.floor(y1 * h)), 0)
    r_hi = min(max(int(np.ceil(y2 * h)), r_lo + 1), h)
    return r_lo, r_hi, c_lo, c_hi


def loss_mask(
    assembled_logits: torch.Tensor,
    gt_masks: torch.Tensor,
    boxes: np.ndarray,
) -> torch.Tensor:
    """Pixel BCE inside each ground-truth box, normalized by its area.

    assembled_logits: (P, Hp, Wp) pre-sigmoid mask logits per positive anchor.
    gt_masks: (P, Hp, Wp) float targets at the same resolution.
    boxes: (P, 4) normalized corner boxes of the matched ground truths.
    """
    if assembled_logits.numel() == 0:
        return assembled_logits.sum() * 0.0
    p, h, w = assembled_logits.shape
    total = assembled_logits.sum() * 0.0
    for i in range(p):
        r_lo, r_hi, c_lo, c_hi = _box_to_cells(boxes[i], h, w)
        pred = assembled_logits[i, r_lo:r_hi, c_lo:c_hi]
        target = gt_masks[i, r_lo:r_hi, c_lo:c_hi]
        bce = F.binary_cross_entropy_with_logits(pred, target, reduction="sum")
        total = total + bce / pred.numel()
    return total / p


def loss_seg(aux_logits: torch.Tensor, gt_semantic: torch.Tensor) -> torch.Tensor:
    """Mean pixel BCE of the stride-8 auxiliary head vs the instance union."""
    return F.binary_cross_entropy_with_logits(
        aux_logits.squeeze(1), gt_semantic, reduction="mean"
    )


def total_loss(parts, weights: LossWeights = LossWeights()) -> torch.Tensor:
    """Weighted sum w_cls*L_cls + w_box*L_box + w_mask*L_mask + w_seg*L_seg."""
    weights.validate()
    l_cls, l_box, l_mask, l_seg = parts
    return (
        weights.w_cls * l_cls
        + weights.w_box * l_box
        + weights.w_mask * l_mask
        + weights.w_seg * l_seg
    )
