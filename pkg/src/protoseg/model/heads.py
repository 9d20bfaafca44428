"""Prototype bank, shared prediction head, NMS wiring and mask assembly.

Masks come from a linear combination of prototype maps: for each surviving
detection, sigmoid(sum_i c_i * P_i) is upsampled (nearest, so small hand
oracles stay exact), cropped to the decoded box and thresholded strictly
above 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .. import kernels
from ..errors import ShapeError
from .anchors import AnchorSet
from .boxes import centers_to_boxes, decode_boxes

SCORE_THRESHOLD = 0.05
IOU_THRESHOLD = 0.5
TOP_K = 20
PRE_NMS = 200


@dataclass(frozen=True)
class Detection:
    score: float
    box: tuple[float, float, float, float]  # normalized corners (x1, y1, x2, y2)
    coefficients: np.ndarray  # (k,) in (-1, 1)


@dataclass(frozen=True)
class AssembledInstance:
    mask: np.ndarray  # (H, W) bool
    score: float
    box: tuple[float, float, float, float]


class ProtoNet(nn.Module):
    """k non-negative prototype maps at stride 4 from the finest level."""

    def __init__(self, in_channels: int, k: int = 8, hidden: int = 32):
        super().__init__()
        if k < 1:
            raise ValueError("need k >= 1 prototypes")
        self.k = k
        self.body = nn.Sequential(
            nn.Conv2d(in_channels, hidden, 3, padding=1),
            nn.ReLU(),
            nn.Conv2d(hidden, hidden, 3, padding=1),
            nn.ReLU(),
            nn.Conv2d(hidden, k, 1),
        )
        # Start the pre-rectification bank positive. With a zero bias the
        # mask loss can push every map below zero early on, after which the
        # rectifier blocks all gradient and the bank never recovers.
        nn.init.constant_(self.body[-1].bias, 1.0)
        self.to(torch.float64)

    def forward(self, finest: torch.Tensor, stride: int = 4) -> torch.Tensor:
        out = self.body(finest)
        if stride > 4:
            out = F.interpolate(out, scale_factor=stride // 4, mode="nearest")
        return torch.relu(out)  # final rectification keeps the bank >= 0


class PredictionHead(nn.Module):
    """Class/box/coefficient branches shared across pyramid levels."""

    def __init__(self, in_channels: int, num_ratios: int, k: int = 8, hidden: int = 32):
        super().__init__()
        self.num_ratios = num_ratios
        self.k = k
        self.tower = nn.Sequential(
            nn.Conv2d(in_channels, hidden, 3, padding=1),
            nn.ReLU(),
        )
        self.cls_branch = nn.Conv2d(hidden, num_ratios * 2, 3, padding=1)
        self.box_branch = nn.Conv2d(hidden, num_ratios * 4, 3, padding=1)
        self.coef_branch = nn.Conv2d(hidden, num_ratios * k, 3, padding=1)
        # Bias the classifier toward background at init (prior ~0.01), so
        # the few foreground anchors are learned up rather than hundreds of
        # background anchors mined down through the score threshold.
        bias = self.cls_branch.bias.detach().view(num_ratios, 2)
        bias[:, 0] = 2.3
        bias[:, 1] = -2.3
        self.to(torch.float64)

    def _flatten(self, x: torch.Tensor, per_anchor: int) -> torch.Tensor:
        b, _, h, w = x.shape
        x = x.view(b, self.num_ratios, per_anchor, h, w)
        x = x.permute(0, 3, 4, 1, 2)  # (B, H, W, A, per_anchor)
        return x.reshape(b, h * w * self.num_ratios, per_anchor)

    def forward(self, levels: list[torch.Tensor]):
        cls, box, coef = [], [], []
        for x in levels:
            t = self.tower(x)
            cls.append(self._flatten(self.cls_branch(t), 2))
            box.append(self._flatten(self.box_branch(t), 4))
            coef.append(torch.tanh(self._flatten(self.coef_branch(t), self.k)))
        return torch.cat(cls, dim=1), torch.cat(box, dim=1), torch.cat(coef, dim=1)


def detect(
    cls_logits: np.ndarray,
    box_deltas: np.ndarray,
    coefficients: np.ndarray,
    anchors: AnchorSet,
    score_threshold: float = SCORE_THRESHOLD,
    iou_threshold: float = IOU_THRESHOLD,
    top_k: int = TOP_K,
) -> list[Detection]:
    """Greedy NMS over thresholded, decoded candidates for one image."""
    cls_logits = np.asarray(cls_logits, dtype=np.float64)
    if cls_logits.shape[0] != len(anchors):
        raise ShapeError(
            f"{cls_logits.shape[0]} predictions for {len(anchors)} anchors"
        )
    shifted = cls_logits - cls_logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    scores = probs[:, 1]

    candidates = np.flatnonzero(scores >= score_threshold)
    if candidates.size == 0:
        return []
    if candidates.size > PRE_NMS:
        order = np.argsort(-scores[candidates], kind="stable")[:PRE_NMS]
        candidates = candidates[order]

    decoded = decode_boxes(box_deltas[candidates], anchors.boxes[candidates])
    corners = np.clip(centers_to_boxes(decoded), 0.0, 1.0)
    keep = kernels.greedy_nms(corners, scores[candidates], iou_threshold)
    keep = keep[:top_k]
    return [
        Detection(
            score=float(scores[candidates[i]]),
            box=tuple(float(v) for v in corners[i]),
            coefficients=np.asarray(coefficients[candidates[i]], dtype=np.float64),
        )
        for i in keep
    ]


def assemble_masks(
    bank: np.ndarray,
    detections: list[Detection],
    image_size: tuple[int, int],
) -> list[AssembledInstance]:
    """Combine prototypes per detection, crop to the box, threshold > 0.5."""
    bank = np.asarray(bank, dtype=np.float64)
    h, w = image_size
    k, ph, pw = bank.shape
    if h % ph or w % pw:
        raise ShapeError(
            f"image {h}x{w} is not an integer multiple of the bank {ph}x{pw}"
        )
    fy, fx = h // ph, w // pw
    out = []
    for det in detections:
        if det.coefficients.shape != (k,):
            raise ShapeError(
                f"detection carries {det.coefficients.shape} coefficients for a bank of {k}"
            )
        lin = np.tensordot(det.coefficients, bank, axes=1)
        small = 1.0 / (1.0 + np.exp(-lin))
        full = np.repeat(np.repeat(small, fy, axis=0), fx, axis=1)
        x1, y1, x2, y2 = det.box
        c_lo, c_hi = int(np.floor(x1 * w)), int(np.ceil(x2 * w))
        r_lo, r_hi = int(np.floor(y1 * h)), int(np.ceil(y2 * h))
        crop = np.zeros((h, w), dtype=bool)
        if r_hi > r_lo and c_hi > c_lo:
            crop[max(r_lo, 0) : r_hi, max(c_lo, 0) : c_hi] = True
        mask = (full > 0.5) & crop
        out.append(AssembledInstance(mask=mask, score=det.score, box=det.box))
    return out
