"""Throughput protocol: time a frame sequence, repeat, average.

The sequence is processed runs + 1 times; the first pass warms caches and
is discarded, the remaining runs are reported individually plus their mean.
"""

from __future__ import annotations

import time
from dataclasses import dataclass


@dataclass(frozen=True)
class FPSReport:
    per_run: tuple[float, ...]
    mean: float


def measure_fps(infer, frames, runs: int = 10) -> FPSReport:
    """``infer`` is called once per frame; fps = len(frames) / wall time."""
    frames = list(frames)
    if not frames:
        raise ValueError("cannot benchmark an empty frame sequence")
    if runs < 1:
        raise ValueError("need at least one timed run")
    rates = []
    for run in range(runs + 1):
        start = time.perf_counter()
        for frame in frames:
            infer(frame)
        elapsed = time.perf_counter() - start
        if run == 0:
            continue  # warm-up
        rates.append(len(frames) / elapsed)
    return FPSReport(per_run=tuple(rates), mean=sum(rates) / len(rates))
