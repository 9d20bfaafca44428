"""Multi-instance scores with optimal one-to-one matching.

Predicted and ground-truth instances are paired by the Hungarian method on
the chosen per-pair score (DSC for MI_DSC, NSD for MI_NSD). The frame score
is the sum of matched pair scores divided by max(|GT|, |pred|), so misses
and false positives both pull it down. Two empty sides score 1.0 (a correct
"no instrument" call); exactly one empty side scores 0.0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .masks import dsc, nsd


@dataclass(frozen=True)
class MatchOutcome:
    pairs: tuple[tuple[int, int, float], ...]  # (pred index, gt index, score)
    unmatched_pred: tuple[int, ...]
    unmatched_gt: tuple[int, ...]

    @property
    def total(self) -> float:
        return sum(p[2] for p in self.pairs)


@dataclass(frozen=True)
class FrameScore:
    frame_id: str
    mi_dsc: float
    mi_nsd: float


def masks_from_id_map(id_map: np.ndarray) -> list[np.ndarray]:
    """Non-empty instance masks from an id map, ordered by ascending id."""
    id_map = np.asarray(id_map)
    return [id_map == v for v in np.unique(id_map) if v != 0]


def _drop_empty(masks) -> list[np.ndarray]:
    return [np.asarray(m, dtype=bool) for m in masks if np.asarray(m).any()]


def match_instances(pred_masks, gt_masks, score_fn=dsc) -> MatchOutcome:
    """Hungarian assignment maximizing the total pairwise score."""
    pred = _drop_empty(pred_masks)
    gt = _drop_empty(gt_masks)
    if not pred or not gt:
        return MatchOutcome(
            pairs=(),
            unmatched_pred=tuple(range(len(pred))),
            unmatched_gt=tuple(range(len(gt))),
        )
    table = np.zeros((len(pred), len(gt)), dtype=np.float64)
    for i, pm in enumerate(pred):
        for j, gm in enumerate(gt):
            table[i, j] = score_fn(pm, gm)
    rows, cols = linear_sum_assignment(-table)
    pairs = tuple(
        (int(i), int(j), float(table[i, j])) for i, j in zip(rows, cols)
    )
    return MatchOutcome(
        pairs=pairs,
        unmatched_pred=tuple(i for i in range(len(pred)) if i not in set(rows)),
        unmatched_gt=tuple(j for j in range(len(gt)) if j not in set(cols)),
    )


def _multi_instance(pred_masks, gt_masks, score_fn) -> float:
    pred = _drop_empty(pred_masks)
    gt = _drop_empty(gt_masks)
    if not pred and not gt:
        return 1.0
    if not pred or not gt:
        return 0.0
    outcome = match_instances(pred, gt, score_fn)
    return outcome.total / max(len(pred), len(gt))


def mi_dsc(pred_masks, gt_masks) -> float:
    return _multi_instance(pred_masks, gt_masks, dsc)


def mi_nsd(pred_masks, gt_masks, tau: float = 2.0) -> float:
    return _multi_instance(pred_masks, gt_masks, lambda a, b: nsd(a, b, tau))


def score_frame(frame_id: str, pred_masks, gt_masks, tau: float = 2.0) -> FrameScore:
    return FrameScore(
        frame_id=frame_id,
        mi_dsc=mi_dsc(pred_masks, gt_masks),
        mi_nsd=mi_nsd(pred_masks, gt_masks, tau),
    )
