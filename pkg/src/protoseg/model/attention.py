"""CBAM and criss-cross attention blocks plus pyramid placement.

Both blocks preserve the input shape, so they can be dropped between the
backbone and the pyramid, after the pyramid, or at both sites. Each pyramid
level gets its own module instance (no weight sharing across scales).
"""

from __future__ import annotations

import math

import torch
from torch import nn
from torch.nn import functional as F

from ..errors import ShapeError
from .types import FeatureMap

KINDS = ("none", "cbam", "ccam")
PLACEMENTS = ("backbone_only", "fpn_only", "full")


class CBAM(nn.Module):
    """Channel gate followed by a spatial gate.

    channel gate: sigmoid(MLP(avgpool(F)) + MLP(maxpool(F))), shared MLP
    with hidden width ceil(C / r).
    spatial gate: sigmoid(conv7x7([channel-mean; channel-max])).
    """

    def __init__(self, channels: int, reduction: int = 4):
        super().__init__()
        if channels < 1:
            raise ValueError("channels must be >= 1")
        hidden = max(math.ceil(channels / reduction), 1)
        self.channels = channels
        self.mlp = nn.Sequential(
            nn.Linear(channels, hidden),
            nn.ReLU(),
            nn.Linear(hidden, channels),
        )
        self.spatial_conv = nn.Conv2d(2, 1, kernel_size=7, padding=3)
        # Open both gates at init. Gates near 0.5 halve the features at
        # every attention site, which stacks up across levels and stalls
        # training; starting near identity lets the gates close selectively.
        nn.init.constant_(self.mlp[-1].bias, 1.5)
        nn.init.constant_(self.spatial_conv.bias, 3.0)
        self.to(torch.float64)

    def channel_gate(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.channels:
            raise ShapeError(f"expected {self.channels} channels, got {x.shape[1]}")
        avg = x.mean(dim=(2, 3))
        peak = x.amax(dim=(2, 3))
        return torch.sigmoid(self.mlp(avg) + self.mlp(peak))

    def spatial_gate(self, x: torch.Tensor) -> torch.Tensor:
        stacked = torch.cat(
            [x.mean(dim=1, keepdim=True), x.amax(dim=1, keepdim=True)], dim=1
        )
        return torch.sigmoid(self.spatial_conv(stacked))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x * self.channel_gate(x)[:, :, None, None]
        return x * self.spatial_gate(x)


class CCAM(nn.Module):
    """Recurrent criss-cross attention with a residual add.

    Each position attends to its full row and column (H + W - 1 entries;
    the duplicate self slot in the column part is masked to -inf before the
    softmax). R recurrences share weights, so two passes already connect
    every position to every other.
    """

    def __init__(self, channels: int, recurrence: int = 2):
        super().__init__()
        if recurrence < 1:
            raise ValueError("recurrence must be >= 1")
        reduced = max(channels // 8, 1)
        self.recurrence = recurrence
        self.query = nn.Conv2d(channels, reduced, 1)
        self.key = nn.Conv2d(channels, reduced, 1)
        self.value = nn.Conv2d(channels, channels, 1)
        self.to(torch.float64)

    def _step(self, x: torch.Tensor) -> torch.Tensor:
        b, c, h, w = x.shape
        q = self.query(x)
        k = self.key(x)
        v = self.value(x)

        # column affinities: position (i, j) against (i', j) for all i'
        energy_col = torch.einsum("bdiw,bdkw->bikw", q, k)  # (B, H, H', W)
        diag = torch.eye(h, dtype=torch.bool, device=x.device)[None, :, :, None]
        energy_col = energy_col.masked_fill(diag, float("-inf"))
        # row affinities: position (i, j) against (i, j') for all j'
        energy_row = torch.einsum("bdhj,bdhk->bhjk", q, k)  # (B, H, W, W')

        # softmax over the combined H + W support
        energy = torch.cat(
            [energy_col.permute(0, 1, 3, 2), energy_row], dim=3
        )  # (B, H, W, H' + W')
        attn = torch.softmax(energy, dim=3)
        attn_col = attn[..., :h]  # (B, H, W, H')
        attn_row = attn[..., h:]  # (B, H, W, W')

        out_col = torch.einsum("bhwk,bckw->bchw", attn_col, v)
        out_row = torch.einsum("bhwk,bchk->bchw", attn_row, v)
        return out_col + out_row + x

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for _ in range(self.recurrence):
            x = self._step(x)
        return x


def build_attention(kind: str, channels: int, cbam_r: int = 4, ccam_recurrence: int = 2):
    """One attention module (or None for kind 'none')."""
    if kind == "none":
        return None
    if kind == "cbam":
        return CBAM(channels, reduction=cbam_r)
    if kind == "ccam":
        return CCAM(channels, recurrence=ccam_recurrence)
    raise ValueError(f"unknown attention kind {kind!r}, expected one of {KINDS}")


class AttentionStack(nn.Module):
    """Per-level attention applied across a pyramid; 'none' is the identity."""

    def __init__(self, kind: str, channel_widths: tuple[int, ...], cbam_r: int = 4,
                 ccam_recurrence: int = 2):
        super().__init__()
        if kind not in KINDS:
            raise ValueError(f"unknown attention kind {kind!r}, expected one of {KINDS}")
        self.kind = kind
        self.blocks = nn.ModuleList(
            build_attention(kind, c, cbam_r, ccam_recurrence) or nn.Identity()
            for c in channel_widths
        )

    def forward(self, pyramid: list[FeatureMap]) -> list[FeatureMap]:
        if self.kind == "none":
            return pyramid
        if len(pyramid) != len(self.blocks):
            raise ShapeError(
                f"attention stack built for {len(self.blocks)} levels, got {len(pyramid)}"
            )
        return [
            FeatureMap(block(f.data), f.stride)
            for block, f in zip(self.blocks, pyramid)
        ]


def attach_attention(
    pyramid: list[FeatureMap],
    kind: str,
    placement: str,
    site: str,
    modules: AttentionStack,
) -> list[FeatureMap]:
    """Apply ``modules`` when ``placement`` covers ``site`` (else identity).

    site 'backbone' is covered by placements backbone_only/full; site 'fpn'
    by fpn_only/full.
    """
    if placement not in PLACEMENTS:
        raise ValueError(f"unknown placement {placement!r}, expected one of {PLACEMENTS}")
    if kind == "none":
        return pyramid
    covered = {
        "backbone": placement in ("backbone_only", "full"),
        "fpn": placement in ("fpn_only", "full"),
    }
    if site not in covered:
        raise ValueError(f"unknown site {site!r}")
    return modules(pyramid) if covered[site] else pyramid
