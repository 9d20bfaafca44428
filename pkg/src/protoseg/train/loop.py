"""Training loop: batching, matching, losses, SGD and logging.

Deterministic given the seed: parameter init, batch sampling and
augmentation all derive from it. Emits a per-iteration CSV loss log and a
final checkpoint when an output directory is given, and aborts with
diagnostics when the total loss stops being finite.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from ..data.types import DatasetManifest, FrameRecord
from ..errors import TrainingDivergedError
from ..model.network import NetworkConfig, ProtoSegNet
from ..seeding import rng_for, seed_torch
from ..synth.augment import AugmentConfig, _resize_nearest, apply_affine, apply_photometric
from .losses import LossWeights, loss_box, loss_cls, loss_mask, loss_seg, total_loss
from .matching import match_anchors
from .checkpoint import save_checkpoint
from .sgd import SGD

LOSS_COLUMNS = ("iteration", "L_cls", "L_box", "L_mask", "L_seg", "total")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_size: int = 8
    iterations: int = 3000
    seed: int = 0
    input_size: tuple[int, int] | None = None

    def validate(self) -> None:
        if self.lr < 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        if self.batch_size < 1 or self.iterations < 1:
            raise ValueError("batch_size and iterations must be >= 1")


def _prepare_frame(
    frame: FrameRecord,
    size: tuple[int, int],
    augment: AugmentConfig | None,
    aug_seed: int,
):
    """Augment + resize one frame; returns (image CHW, corner boxes, masks)."""
    if augment is not None:
        image = apply_photometric(frame.image, augment, aug_seed)
        frame = FrameRecord(
            frame_id=frame.frame_id,
            image=image,
            instances=frame.instances,
            tags=frame.tags,
        )
        frame = apply_affine(frame, augment, aug_seed)

    h, w = frame.image.shape[:2]
    th, tw = size
    image = frame.image
    masks = [inst.mask for inst in frame.instances]
    if (h, w) != (th, tw):
        image = _resize_nearest(image, (th, tw))
        masks = [_resize_nearest(m, (th, tw)) for m in masks]
        masks = [m for m in masks if m.any()]

    boxes = []
    kept_masks = []
    for m in masks:
        rows = np.flatnonzero(m.any(axis=1))
        cols = np.flatnonzero(m.any(axis=0))
        boxes.append(
            (cols[0] / tw, rows[0] / th, (cols[-1] + 1) / tw, (rows[-1] + 1) / th)
        )
        kept_masks.append(m)
    boxes_arr = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    return image.transpose(2, 0, 1), boxes_arr, kept_masks


def train(
    model_config: NetworkConfig,
    train_config: TrainConfig,
    dataset: DatasetManifest,
    augment: AugmentConfig | None = None,
    weights: LossWeights = LossWeights(),
    out_dir=None,
):
    """Returns (model, history); history rows mirror the CSV loss log."""
    train_config.validate()
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    if train_config.input_size is not None and tuple(train_config.input_size) != tuple(
        model_config.image_size
    ):
        raise ValueError(
            f"train input size {train_config.input_size} disagrees with "
            f"model image size {model_config.image_size}"
        )

    seed_torch(train_config.seed)
    model = ProtoSegNet(model_config)
    model.train()
    opt = SGD(
        model.parameters(),
        lr=train_config.lr,
        momentum=train_config.momentum,
        weight_decay=train_config.weight_decay,
    )
    rng = rng_for(train_config.seed, "batches")
    size = model_config.image_size
    proto_hw = (size[0] // 4, size[1] // 4)
    seg_hw = (size[0] // 8, size[1] // 8)
    anchors = model.anchors
    n_frames = len(dataset)
    history: list[dict] = []

    for it in range(train_config.iterations):
        idx = rng.choice(n_frames, size=train_config.batch_size, replace=n_frames < train_config.batch_size)
        prepared = [
            _prepare_frame(
                dataset.frames[i],
                size,
                augment,
                int(rng.integers(0, 2**62)),
            )
            for i in idx
        ]
        images = torch.from_numpy(np.stack([p[0] for p in prepared]))
        out = model(images)

        cls_parts = []
        box_pred_parts, box_gt_parts = [], []
        mask_logit_parts, mask_gt_parts, mask_box_parts = [], [], []
        seg_targets = []
        for b, (_, gt_boxes, gt_masks) in enumerate(prepared):
            match = match_anchors(anchors.boxes, gt_boxes)
            cls_parts.append(loss_cls(out["cls"][b], match.labels))
            pos = np.flatnonzero(match.positive)
            if pos.size:
                pos_t = torch.from_numpy(pos)
                box_pred_parts.append(out["box"][b][pos_t])
                box_gt_parts.append(torch.from_numpy(match.deltas[pos]))
                gt_small = np.stack(
                    [_resize_nearest(m, proto_hw) for m in gt_masks]
                ).astype(np.float64)
                matched = match.labels[pos]
                lin = torch.einsum(
                    "pk,khw->phw", out["coef"][b][pos_t], out["proto"][b]
                )
                mask_logit_parts.append(lin)
                mask_gt_parts.append(torch.from_numpy(gt_small[matched]))
                mask_box_parts.append(gt_boxes[matched])
            union = np.zeros(size, dtype=bool)
            for m in gt_masks:
                union |= m
            seg_targets.append(_resize_nearest(union, seg_hw).astype(np.float64))

        l_cls = torch.stack(cls_parts).mean()
        if box_pred_parts:
            l_box = loss_box(torch.cat(box_pred_parts), torch.cat(box_gt_parts))
            l_mask = loss_mask(
                torch.cat(mask_logit_parts),
                torch.cat(mask_gt_parts),
                np.concatenate(mask_box_parts, axis=0),
            )
        else:
            l_box = out["box"].sum() * 0.0
            l_mask = out["coef"].sum() * 0.0
        l_seg = loss_seg(out["seg"], torch.from_numpy(np.stack(seg_targets)))

        parts = (l_cls, l_box, l_mask, l_seg)
        total = total_loss(parts, weights)

        part_vals = [float(p.detach()) for p in parts]
        total_val = float(total.detach())
        if not np.isfinite(total_val):
            bad = next(
                (name for name, v in zip(("cls", "box", "mask", "seg"), part_vals) if not np.isfinite(v)),
                "total",
            )
            raise TrainingDivergedError(iteration=it, term=bad, max_abs_grad=_max_grad(model))

        opt.zero_grad()
        total.backward()
        opt.step()

        history.append(
            {
                "iteration": it,
                "L_cls": part_vals[0],
                "L_box": part_vals[1],
                "L_mask": part_vals[2],
                "L_seg": part_vals[3],
                "total": total_val,
            }
        )

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "loss_log.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=LOSS_COLUMNS)
            writer.writeheader()
            writer.writerows(history)
        save_checkpoint(
            out_dir / "checkpoint.psc",
            model,
            config={
                "model": asdict(model_config),
                "train": asdict(train_config),
            },
            seed=train_config.seed,
        )
    return model, history


def _max_grad(model) -> float:
    peak = 0.0
    for p in model.parameters():
        if p.grad is not None:
            peak = max(peak, float(p.grad.detach().abs().max()))
    return peak
