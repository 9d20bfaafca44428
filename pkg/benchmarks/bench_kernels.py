"""Timing comparison of the compiled and numpy kernel backends.

Run as a script:

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size 192]

Each kernel runs on identical inputs under both backends; outputs are
checked for agreement before timing so a fast-but-wrong backend cannot win.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from protoseg import kernels
from protoseg.seeding import rng_for


def _blob_mask(rng, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    cy, cx = rng.uniform(0.25 * size, 0.75 * size, size=2)
    ry, rx = rng.uniform(0.1 * size, 0.35 * size, size=2)
    return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0


def _cases(size: int):
    rng = rng_for(7, "bench")
    a = _blob_mask(rng, size)
    b = _blob_mask(rng, size)
    boundary_a = kernels.boundary(a)
    boundary_b = kernels.boundary(b)
    boxes = rng.uniform(0.0, 1.0, size=(400, 4))
    boxes = np.sort(boxes.reshape(-1, 2, 2), axis=1).reshape(-1, 4)[:, [0, 2, 1, 3]]
    scores = rng.uniform(0.0, 1.0, size=400)
    ids_a = (a.astype(np.int64) + 2 * b.astype(np.int64)) % 3
    ids_b = np.roll(ids_a, 3, axis=1)
    return {
        "intersection_count": lambda: kernels.intersection_count(a, b),
        "boundary": lambda: kernels.boundary(a),
        "tolerance_match_counts": lambda: kernels.tolerance_match_counts(
            boundary_a, boundary_b, 2.0
        ),
        "box_iou_matrix": lambda: kernels.box_iou_matrix(boxes, boxes),
        "greedy_nms": lambda: kernels.greedy_nms(boxes, scores, 0.5),
        "pair_intersection_counts": lambda: kernels.pair_intersection_counts(
            ids_a, ids_b, 3, 3
        ),
    }


def _check_agreement(cases) -> None:
    for name, fn in cases.items():
        results = {}
        for backend in kernels.available_backends():
            kernels.use_backend(backend)
            results[backend] = np.asarray(fn())
        values = list(results.values())
        for other in values[1:]:
            if not np.array_equal(values[0], other):
                raise AssertionError(f"backends disagree on {name}")


def _time(fn, repeat: int) -> float:
    fn()  # warm up
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--size", type=int, default=192)
    args = parser.parse_args()

    cases = _cases(args.size)
    backends = kernels.available_backends()
    if len(backends) > 1:
        _check_agreement(cases)
        print("backends agree on all kernels")
    else:
        print("compiled extension unavailable; timing numpy backend only")

    header = f"{'kernel':28s}" + "".join(f"{b:>12s}" for b in backends)
    print(header + ("     speedup" if len(backends) > 1 else ""))
    for name, fn in cases.items():
        times = {}
        for backend in backends:
            kernels.use_backend(backend)
            times[backend] = _time(fn, args.repeat)
        line = f"{name:28s}" + "".join(f"{times[b] * 1e3:10.3f}ms" for b in backends)
        if len(backends) > 1:
            line += f"{times['numpy'] / times['compiled']:11.2f}x"
        print(line)
    kernels.use_backend(backends[0])


if __name__ == "__main__":
    main()
