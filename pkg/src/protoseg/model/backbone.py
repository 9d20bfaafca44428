"""Small residual backbone emitting one feature map per stage.

Four stages of two residual blocks at widths [16, 32, 64, 128] by default,
giving strides [4, 8, 16, 32] after a stride-4 stem. No normalization layers:
the whole network trains in float64 and every parameter is covered by
finite-difference gradient checks, which BatchNorm's batch coupling would
muddy. The residual path can be disabled per config, which makes the
zero-weight forward produce exact zeros (a test hook).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from ..errors import ShapeError
from .types import FeatureMap


@dataclass(frozen=True)
class BackboneConfig:
    widths: tuple[int, ...] = (16, 32, 64, 128)
    blocks_per_stage: int = 2
    residual: bool = True

    def validate(self) -> None:
        if len(self.widths) < 2:
            raise ValueError(f"need at least 2 stages, got {len(self.widths)}")
        if self.blocks_per_stage < 1:
            raise ValueError("blocks_per_stage must be >= 1")

    @property
    def strides(self) -> tuple[int, ...]:
        return tuple(4 * 2**i for i in range(len(self.widths)))


class ResidualBlock(nn.Module):
    def __init__(self, channels: int, residual: bool = True):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)
        self.residual = residual

    def forward(self, x):
        y = self.conv2(torch.relu(self.conv1(x)))
        if self.residual:
            y = y + x
        return torch.relu(y)


class Backbone(nn.Module):
    def __init__(self, config: BackboneConfig = BackboneConfig()):
        super().__init__()
        config.validate()
        self.config = config
        w = config.widths
        self.stem = nn.Sequential(
            nn.Conv2d(3, w[0], 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(w[0], w[0], 3, stride=2, padding=1),
            nn.ReLU(),
        )
        stages = []
        for i, width in enumerate(w):
            layers: list[nn.Module] = []
            if i > 0:
                layers.append(nn.Conv2d(w[i - 1], width, 3, stride=2, padding=1))
                layers.append(nn.ReLU())
            layers.extend(
                ResidualBlock(width, config.residual)
                for _ in range(config.blocks_per_stage)
            )
            stages.append(nn.Sequential(*layers))
        self.stages = nn.ModuleList(stages)
        self.to(torch.float64)

    def forward(self, image: torch.Tensor) -> list[FeatureMap]:
        if image.ndim != 4 or image.shape[1] != 3:
            raise ShapeError(f"expected (B, 3, H, W) input, got {tuple(image.shape)}")
        h, w = image.shape[-2:]
        max_stride = self.config.strides[-1]
        if h % max_stride or w % max_stride:
            raise ShapeError(
                f"input {h}x{w} not divisible by the maximum stride {max_stride}"
            )
        x = self.stem(image)
        out = []
        for stage, stride in zip(self.stages, self.config.strides):
            x = stage(x)
            out.append(FeatureMap(x, stride))
        return out
