"""Binary-mask metrics: Dice overlap and normalized surface dice."""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..errors import UndefinedMetricError


def dsc(a: np.ndarray, b: np.ndarray) -> float:
    """2|A n B| / (|A| + |B|); undefined when both masks are empty."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    size_a = int(a.sum())
    size_b = int(b.sum())
    if size_a + size_b == 0:
        raise UndefinedMetricError("DSC of two empty masks is undefined")
    return 2.0 * kernels.intersection_count(a, b) / (size_a + size_b)


def boundary(mask: np.ndarray) -> np.ndarray:
    """Set pixels 4-adjacent to an unset or out-of-bounds pixel."""
    return kernels.boundary(np.asarray(mask, dtype=bool))


def nsd(a: np.ndarray, b: np.ndarray, tau: float = 2.0) -> float:
    """Normalized surface dice at Euclidean tolerance ``tau`` pixels.

    (|dA within tau of dB| + |dB within tau of dA|) / (|dA| + |dB|).
    Undefined when both masks are empty; one empty mask scores 0.
    """
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    if tau < 0:
        raise ValueError(f"tolerance must be >= 0, got {tau}")
    if not a.any() and not b.any():
        raise UndefinedMetricError("NSD of two empty masks is undefined")
    if not a.any() or not b.any():
        return 0.0
    ba = kernels.boundary(a)
    bb = kernels.boundary(b)
    near_ab, near_ba = kernels.tolerance_match_counts(ba, bb, tau)
    return (near_ab + near_ba) / (int(ba.sum()) + int(bb.sum()))
