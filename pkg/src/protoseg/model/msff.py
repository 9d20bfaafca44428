"""Multi-scale feature fusion ahead of the pyramid.

Every backbone scale is upsampled to the finest resolution by a transposed
conv (kernel = stride = the stride ratio; the finest scale passes through a
stride-1 conv), the enlarged maps are concatenated and fused into a single
map F_MS, F_MS is then concatenated with each enlarged map and convolved
into per-scale aggregates, and finally strided 3x3 convs restore each
aggregate to its native stride so the pyramid contract downstream is
unchanged. Disabled mode is the exact identity.

F_MS and the intermediate maps use the finest level's channel width, which
keeps compute bounded at the highest resolution.
"""

from __future__ import annotations

import torch
from torch import nn

from ..errors import ShapeError
from .types import FeatureMap


class MSFF(nn.Module):
    def __init__(self, in_widths: tuple[int, ...], enabled: bool = True):
        super().__init__()
        if len(in_widths) < 2:
            raise ValueError(f"need >= 2 scales, got {len(in_widths)}")
        self.enabled = enabled
        self.in_widths = tuple(in_widths)
        width = in_widths[0]
        self.width = width

        ups = []
        for s, c in enumerate(in_widths):
            ratio = 2**s
            if s == 0:
                ups.append(nn.Conv2d(c, width, 1))
            else:
                ups.append(nn.ConvTranspose2d(c, width, kernel_size=ratio, stride=ratio))
        self.upsample = nn.ModuleList(ups)
        self.fuse_conv = nn.Conv2d(width * len(in_widths), width, 3, padding=1)
        self.aggregate_convs = nn.ModuleList(
            nn.Conv2d(2 * width, width, 3, padding=1) for _ in in_widths
        )
        downs = []
        for s in range(len(in_widths)):
            layers: list[nn.Module] = []
            ch = width
            for step in range(s):
                layers.append(nn.Conv2d(ch, in_widths[step + 1], 3, stride=2, padding=1))
                if step + 1 < s:
                    layers.append(nn.ReLU())
                ch = in_widths[step + 1]
            downs.append(nn.Sequential(*layers))  # empty for s=0: already native
        self.restore = nn.ModuleList(downs)
        self.to(torch.float64)

    def upsample_to_top(self, fmap: FeatureMap, top_stride: int, scale_index: int) -> torch.Tensor:
        """Enlarge one scale to the finest resolution (F'_s)."""
        if fmap.stride % top_stride:
            raise ShapeError(
                f"stride {fmap.stride} is not an integer multiple of the top stride {top_stride}"
            )
        ratio = fmap.stride // top_stride
        if ratio != 2**scale_index:
            raise ShapeError(
                f"scale {scale_index} has stride ratio {ratio}, expected {2**scale_index}"
            )
        return self.upsample[scale_index](fmap.data)

    def fuse(self, enlarged: list[torch.Tensor]) -> torch.Tensor:
        """Concatenate all F'_s (order s = 0..S-1) and convolve into F_MS."""
        dims = {tuple(t.shape[-2:]) for t in enlarged}
        if len(dims) != 1:
            raise ShapeError(f"enlarged maps disagree on spatial dims: {sorted(dims)}")
        return self.fuse_conv(torch.cat(enlarged, dim=1))

    def aggregate(self, f_ms: torch.Tensor, enlarged: torch.Tensor, scale_index: int) -> torch.Tensor:
        """Concatenate F_MS with one F'_s and convolve into F_A,s."""
        return self.aggregate_convs[scale_index](torch.cat([f_ms, enlarged], dim=1))

    def forward(self, pyramid: list[FeatureMap]) -> list[FeatureMap]:
        if not self.enabled:
            return pyramid
        if len(pyramid) != len(self.in_widths):
            raise ShapeError(
                f"built for {len(self.in_widths)} scales, got {len(pyramid)}"
            )
        top_stride = pyramid[0].stride
        enlarged = [
            self.upsample_to_top(fmap, top_stride, s) for s, fmap in enumerate(pyramid)
        ]
        f_ms = self.fuse(enlarged)
        out = []
        for s, fmap in enumerate(pyramid):
            fused = self.aggregate(f_ms, enlarged[s], s)
            restored = self.restore[s](fused)
            if restored.shape[-2:] != fmap.data.shape[-2:]:
                raise ShapeError(
                    f"restored scale {s} has dims {tuple(restored.shape[-2:])}, "
                    f"expected {tuple(fmap.data.shape[-2:])}"
                )
            out.append(FeatureMap(restored, fmap.stride))
        return out
