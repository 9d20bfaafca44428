"""Feature pyramid over the backbone stages.

Per level: 1x1 lateral projection, nearest-neighbor top-down upsampling with
elementwise add, then a 3x3 smoothing conv. Two extra coarser levels come
from stride-2 convs on the coarsest output, so four backbone stages yield
six P-levels at strides [4, 8, 16, 32, 64, 128].
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from ..errors import ShapeError
from .types import FeatureMap


class FPN(nn.Module):
    def __init__(self, in_widths: tuple[int, ...], width: int = 32, extra_levels: int = 2):
        super().__init__()
        if len(in_widths) < 2:
            raise ValueError(f"need >= 2 input levels, got {len(in_widths)}")
        self.in_widths = tuple(in_widths)
        self.width = width
        self.laterals = nn.ModuleList(nn.Conv2d(c, width, 1) for c in in_widths)
        self.smooth = nn.ModuleList(
            nn.Conv2d(width, width, 3, padding=1) for _ in in_widths
        )
        self.extras = nn.ModuleList(
            nn.Conv2d(width, width, 3, stride=2, padding=1) for _ in range(extra_levels)
        )
        self.to(torch.float64)

    def forward(self, pyramid: list[FeatureMap]) -> list[FeatureMap]:
        if len(pyramid) != len(self.laterals):
            raise ShapeError(
                f"expected {len(self.laterals)} levels, got {len(pyramid)}"
            )
        for fmap, c in zip(pyramid, self.in_widths):
            if fmap.data.shape[1] != c:
                raise ShapeError(
                    f"level at stride {fmap.stride} has {fmap.data.shape[1]} channels, expected {c}"
                )
        laterals = [lat(f.data) for lat, f in zip(self.laterals, pyramid)]
        for i in range(len(laterals) - 2, -1, -1):
            up = F.interpolate(laterals[i + 1], size=laterals[i].shape[-2:], mode="nearest")
            laterals[i] = laterals[i] + up
        levels = [
            FeatureMap(sm(lat), f.stride)
            for sm, lat, f in zip(self.smooth, laterals, pyramid)
        ]
        x = levels[-1].data
        stride = levels[-1].stride
        for i, extra in enumerate(self.extras):
            x = extra(x if i == 0 else torch.relu(x))
            stride *= 2
            levels.append(FeatureMap(x, stride))
        return levels
