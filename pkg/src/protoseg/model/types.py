"""Shared model-side containers."""

from __future__ import annotations

from typing import NamedTuple

import torch


class FeatureMap(NamedTuple):
    """A feature tensor tagged with its pixel stride."""

    data: torch.Tensor
    stride: int

    @property
    def spatial(self) -> tuple[int, int]:
        return (int(self.data.shape[-2]), int(self.data.shape[-1]))


def check_strides_increasing(pyramid: list[FeatureMap]) -> None:
    strides = [f.stride for f in pyramid]
    if any(b <= a for a, b in zip(strides, strides[1:])):
        raise ValueError(f"pyramid strides must strictly increase, got {strides}")
