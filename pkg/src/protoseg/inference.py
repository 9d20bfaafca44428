"""Run a trained network on images and turn detections into instance maps."""

from __future__ import annotations

import numpy as np
import torch

from .model.heads import (
    IOU_THRESHOLD,
    SCORE_THRESHOLD,
    TOP_K,
    AssembledInstance,
    assemble_masks,
    detect,
)
from .model.network import NetworkConfig, ProtoSegNet
from .train.checkpoint import load_checkpoint, load_into


def predict(
    model: ProtoSegNet,
    image: np.ndarray,
    score_threshold: float = SCORE_THRESHOLD,
    iou_threshold: float = IOU_THRESHOLD,
    top_k: int = TOP_K,
) -> list[AssembledInstance]:
    """Detections for one HxWx3 float image, best score first."""
    tensor = torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1)))[None]
    tensor = tensor.to(torch.float64)
    with torch.no_grad():
        outputs = model(tensor)
    detections = detect(
        outputs["cls"][0].numpy(),
        outputs["box"][0].numpy(),
        outputs["coef"][0].numpy(),
        model.anchors,
        score_threshold=score_threshold,
        iou_threshold=iou_threshold,
        top_k=top_k,
    )
    height, width = image.shape[:2]
    bank = outputs["proto"][0].numpy()
    return assemble_masks(bank, detections, (height, width))


def instances_to_id_map(instances, shape) -> np.ndarray:
    """Flatten overlapping masks into one id map; higher scores win.

    Ids are 1-based in score order (1 = best), matching the sidecar index.
    """
    id_map = np.zeros(shape, dtype=np.int64)
    ranked = sorted(enumerate(instances), key=lambda pair: pair[1].score)
    for index, inst in ranked:
        id_map[inst.mask] = index + 1
    return id_map


def network_config_from_dict(raw: dict) -> NetworkConfig:
    """Rebuild a network config from a checkpoint's config echo."""
    if "model" in raw and isinstance(raw["model"], dict):
        raw = raw["model"]
    kwargs = {}
    for name in NetworkConfig.__dataclass_fields__:
        if name not in raw:
            continue
        value = raw[name]
        kwargs[name] = tuple(value) if isinstance(value, list) else value
    config = NetworkConfig(**kwargs)
    config.validate()
    return config


def load_model(path) -> tuple[ProtoSegNet, dict, int]:
    """Restore a network from a checkpoint file."""
    params, config_echo, seed = load_checkpoint(path)
    config = network_config_from_dict(config_echo)
    model = ProtoSegNet(config)
    load_into(model, params)
    model.eval()
    return model, config_echo, seed
