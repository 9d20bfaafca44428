"""Score aggregation and bootstrap ranking across algorithms.

Aggregation is the 5th percentile (linear interpolation on sorted scores),
which rewards robustness on the worst frames rather than average quality.
Ranking variability comes from B bootstrap resamples of the frame set; each
resample aggregates every algorithm on the same drawn frames and ranks them
descending, ties sharing the average rank. Per-sample seed streams are
split from the master seed, so parallel and serial evaluation agree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from ..errors import ConfigError
from ..seeding import rng_for


def aggregate_percentile(scores, p: float = 5.0) -> float:
    """Linear-interpolation percentile (rank p/100 * (n - 1) on sorted data)."""
    scores = np.asarray(list(scores), dtype=np.float64)
    if scores.size == 0:
        raise ValueError("cannot aggregate an empty score list")
    return float(np.percentile(scores, p, method="linear"))


@dataclass(frozen=True)
class AggregateReport:
    algorithm: str
    mi_dsc_aggregate: float
    mi_nsd_aggregate: float
    frame_scores: tuple  # FrameScore rows


def aggregate_scores(algorithm: str, frame_scores, p: float = 5.0) -> AggregateReport:
    rows = tuple(frame_scores)
    return AggregateReport(
        algorithm=algorithm,
        mi_dsc_aggregate=aggregate_percentile([s.mi_dsc for s in rows], p),
        mi_nsd_aggregate=aggregate_percentile([s.mi_nsd for s in rows], p),
        frame_scores=rows,
    )


@dataclass(frozen=True)
class RankingReport:
    algorithms: tuple[str, ...]
    ranks: np.ndarray  # (B, A)

    @property
    def median_ranks(self) -> np.ndarray:
        return np.median(self.ranks, axis=0)

    def histogram(self, algorithm: str) -> dict[float, int]:
        col = self.ranks[:, self.algorithms.index(algorithm)]
        values, counts = np.unique(col, return_counts=True)
        return {float(v): int(c) for v, c in zip(values, counts)}


def bootstrap_ranking(
    score_tables: dict[str, dict[str, float]],
    b: int = 1000,
    seed: int = 0,
    p: float = 5.0,
) -> RankingReport:
    """Rank algorithms over B bootstrap resamples of the shared frame set.

    score_tables maps algorithm -> {frame_id -> score}; every algorithm must
    cover the identical frame set.
    """
    if not score_tables:
        raise ConfigError("need at least one algorithm to rank")
    algorithms = tuple(sorted(score_tables))
    frame_sets = [frozenset(score_tables[a]) for a in algorithms]
    if any(fs != frame_sets[0] for fs in frame_sets[1:]):
        raise ConfigError("algorithms were scored on different frame sets")
    frames = sorted(frame_sets[0])
    if not frames:
        raise ConfigError("empty frame set")
    n = len(frames)
    table = np.array(
        [[score_tables[a][f] for f in frames] for a in algorithms], dtype=np.float64
    )  # (A, n)

    ranks = np.empty((b, len(algorithms)), dtype=np.float64)
    for sample in range(b):
        rng = rng_for(seed, "bootstrap", sample)
        draw = rng.integers(0, n, size=n)
        aggregates = np.percentile(table[:, draw], p, axis=1, method="linear")
        # descending: best aggregate gets rank 1; ties share the average rank
        ranks[sample] = rankdata(-aggregates, method="average")
    return RankingReport(algorithms=algorithms, ranks=ranks)
