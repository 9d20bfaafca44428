"""Full network assembly driven by one config dataclass.

Data flow: backbone stages -> optional MSFF -> optional attention
(backbone site) -> FPN -> optional attention (FPN site) -> prototype net on
the finest level + shared prediction head on the coarsest `head_levels`
levels + a 1-channel auxiliary segmentation head at stride 8 (training
only). Anchors are generated once for the configured input size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from ..errors import ConfigError, ShapeError
from .anchors import DEFAULT_RATIOS, DEFAULT_SCALES, AnchorSet, generate_anchors
from .attention import KINDS, PLACEMENTS, AttentionStack
from .backbone import Backbone, BackboneConfig
from .fpn import FPN
from .heads import PredictionHead, ProtoNet
from .msff import MSFF
from .types import FeatureMap


@dataclass(frozen=True)
class NetworkConfig:
    image_size: tuple[int, int] = (96, 96)
    widths: tuple[int, ...] = (16, 32, 64, 128)
    blocks_per_stage: int = 2
    fpn_width: int = 32
    head_levels: int = 5
    num_prototypes: int = 8
    attention_kind: str = "none"
    attention_placement: str = "full"
    cbam_r: int = 4
    ccam_recurrence: int = 2
    msff_enabled: bool = False
    scales: tuple[float, ...] = DEFAULT_SCALES
    ratios: tuple[float, ...] = DEFAULT_RATIOS

    def validate(self) -> None:
        if self.attention_kind not in KINDS:
            raise ConfigError(f"attention.kind must be one of {KINDS}, got {self.attention_kind!r}")
        if self.attention_placement not in PLACEMENTS:
            raise ConfigError(
                f"attention.placement must be one of {PLACEMENTS}, got {self.attention_placement!r}"
            )
        n_levels = len(self.widths) + 2
        if not 1 <= self.head_levels <= n_levels:
            raise ConfigError(
                f"head_levels must be in [1, {n_levels}], got {self.head_levels}"
            )
        if len(self.scales) != self.head_levels:
            raise ConfigError(
                f"{self.head_levels} head levels need {self.head_levels} anchor scales, got {len(self.scales)}"
            )
        if self.num_prototypes < 1:
            raise ConfigError("num_prototypes must be >= 1")
        h, w = self.image_size
        max_stride = 4 * 2 ** (len(self.widths) - 1)
        if h % max_stride or w % max_stride:
            raise ConfigError(
                f"image size {h}x{w} must be divisible by the backbone stride {max_stride}"
            )


class ProtoSegNet(nn.Module):
    def __init__(self, config: NetworkConfig = NetworkConfig()):
        super().__init__()
        config.validate()
        self.config = config
        self.backbone = Backbone(
            BackboneConfig(widths=config.widths, blocks_per_stage=config.blocks_per_stage)
        )
        self.msff = MSFF(config.widths, enabled=config.msff_enabled)
        n_p_levels = len(config.widths) + 2

        at_backbone = config.attention_kind != "none" and config.attention_placement in (
            "backbone_only",
            "full",
        )
        at_fpn = config.attention_kind != "none" and config.attention_placement in (
            "fpn_only",
            "full",
        )
        self.backbone_attention = AttentionStack(
            config.attention_kind if at_backbone else "none",
            config.widths,
            config.cbam_r,
            config.ccam_recurrence,
        )
        self.fpn = FPN(config.widths, width=config.fpn_width, extra_levels=2)
        self.fpn_attention = AttentionStack(
            config.attention_kind if at_fpn else "none",
            tuple(config.fpn_width for _ in range(n_p_levels)),
            config.cbam_r,
            config.ccam_recurrence,
        )
        self.protonet = ProtoNet(config.fpn_width, k=config.num_prototypes)
        self.head = PredictionHead(
            config.fpn_width, num_ratios=len(config.ratios), k=config.num_prototypes
        )
        self.seg_head = nn.Conv2d(config.fpn_width, 1, 1).to(torch.float64)

        self.anchors: AnchorSet = generate_anchors(
            self._head_level_shapes(), config.scales, config.ratios
        )

    def _head_level_shapes(self) -> list[tuple[int, int]]:
        with torch.no_grad():
            probe = torch.zeros((1, 3, *self.config.image_size), dtype=torch.float64)
            levels = self.fpn(self.backbone(probe))
        return [f.spatial for f in levels[-self.config.head_levels :]]

    def forward(self, images: torch.Tensor) -> dict:
        h, w = self.config.image_size
        if images.shape[-2:] != (h, w):
            raise ShapeError(
                f"network built for {h}x{w} inputs, got {tuple(images.shape[-2:])}"
            )
        pyramid = self.backbone(images)
        pyramid = self.msff(pyramid)
        pyramid = self.backbone_attention(pyramid)
        levels = self.fpn(pyramid)
        levels = self.fpn_attention(levels)

        proto = self.protonet(levels[0].data, stride=levels[0].stride)
        head_levels = levels[-self.config.head_levels :]
        cls, box, coef = self.head([f.data for f in head_levels])
        stride8 = next(f for f in levels if f.stride == 8)
        seg = self.seg_head(stride8.data)
        return {
            "cls": cls,
            "box": box,
            "coef": coef,
            "proto": proto,
            "seg": seg,
            "levels": levels,
        }
