"""Exact mask contour extraction and polygon rasterization.

Contours are traced along pixel boundaries (marching squares on the binary
grid), so vertices sit at integer pixel corners and rasterizing the polygons
with even-odd fill reproduces the mask bit for bit, holes included.
"""

from __future__ import annotations

import numpy as np

# walking directions, (dx, dy) with y pointing down
_RIGHT_TURN = {(1, 0): (0, -1), (0, -1): (-1, 0), (-1, 0): (0, 1), (0, 1): (1, 0)}


def _boundary_edges(mask: np.ndarray):
    """Directed unit edges with the set pixel on the walker's right."""
    edges = []
    padded = np.pad(mask, 1, constant_values=False)
    rows, cols = np.nonzero(mask)
    for r, c in zip(rows.tolist(), cols.tolist()):
        if not padded[r, c + 1]:  # up neighbor unset
            edges.append(((c, r), (c + 1, r)))
        if not padded[r + 1, c + 2]:  # right
            edges.append(((c + 1, r), (c + 1, r + 1)))
        if not padded[r + 2, c + 1]:  # down
            edges.append(((c + 1, r + 1), (c, r + 1)))
        if not padded[r + 1, c]:  # left
            edges.append(((c, r + 1), (c, r)))
    return edges


def _simplify(loop):
    """Drop intermediate vertices of straight runs."""
    out = []
    n = len(loop)
    for i, point in enumerate(loop):
        prev = loop[i - 1]
        nxt = loop[(i + 1) % n]
        d_in = (point[0] - prev[0], point[1] - prev[1])
        d_out = (nxt[0] - point[0], nxt[1] - point[1])
        if d_in != d_out:
            out.append(point)
    return out


def mask_to_contours(mask: np.ndarray) -> list[list[tuple[int, int]]]:
    """Closed (x, y) vertex loops outlining a binary mask.

    Loops follow 4-connected components; diagonal touches stay separate.
    An empty mask yields an empty list.
    """
    mask = np.asarray(mask, dtype=bool)
    edges = _boundary_edges(mask)
    if not edges:
        return []
    outgoing: dict[tuple[int, int], list[int]] = {}
    for idx, (start, _end) in enumerate(edges):
        outgoing.setdefault(start, []).append(idx)

    used = [False] * len(edges)
    loops = []
    for first in range(len(edges)):
        if used[first]:
            continue
        loop = []
        idx = first
        while not used[idx]:
            used[idx] = True
            start, end = edges[idx]
            loop.append(start)
            candidates = [j for j in outgoing.get(end, ()) if not used[j] or j == first]
            if not candidates:
                break
            if len(candidates) == 1:
                idx = candidates[0]
            else:
                # crossing corner between diagonal pixels: prefer the right
                # turn so 4-connected components keep separate loops
                direction = (end[0] - start[0], end[1] - start[1])
                want = _RIGHT_TURN[direction]
                idx = next(
                    j for j in candidates
                    if (edges[j][1][0] - end[0], edges[j][1][1] - end[1]) == want
                )
        loops.append(_simplify(loop))
    return loops


def fill_polygons(polygons, shape: tuple[int, int]) -> np.ndarray:
    """Rasterize (x, y) vertex loops into an (H, W) boolean mask.

    Even-odd rule on pixel centers (c + 0.5, r + 0.5). Handles general
    float polygons; exact for the integer rectilinear loops produced by
    mask_to_contours.
    """
    height, width = shape
    toggles = np.zeros((height, width + 1), dtype=np.uint8)
    for poly in polygons:
        n = len(poly)
        for i in range(n):
            x0, y0 = poly[i]
            x1, y1 = poly[(i + 1) % n]
            if y0 == y1:
                continue
            y_lo, y_hi = (y0, y1) if y0 < y1 else (y1, y0)
            r_lo = int(np.ceil(y_lo - 0.5))
            r_hi = int(np.ceil(y_hi - 0.5))  # exclusive
            r_lo = max(r_lo, 0)
            r_hi = min(r_hi, height)
            if r_lo >= r_hi:
                continue
            centers = np.arange(r_lo, r_hi) + 0.5
            xs = x0 + (x1 - x0) * (centers - y0) / (y1 - y0)
            cols = np.ceil(xs - 0.5).astype(int)
            valid = cols < width
            cols = np.clip(cols[valid], 0, width)
            np.bitwise_xor.at(toggles, (np.arange(r_lo, r_hi)[valid], cols), 1)
    filled = np.bitwise_xor.accumulate(toggles, axis=1)
    return filled[:, :width].astype(bool)
