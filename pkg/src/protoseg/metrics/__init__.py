from .masks import boundary, dsc, nsd
from .instances import (
    FrameScore,
    MatchOutcome,
    masks_from_id_map,
    match_instances,
    mi_dsc,
    mi_nsd,
    score_frame,
)
from .aggregate import (
    AggregateReport,
    RankingReport,
    aggregate_percentile,
    aggregate_scores,
    bootstrap_ranking,
)
from .fps import FPSReport, measure_fps

__all__ = [
    "dsc",
    "boundary",
    "nsd",
    "MatchOutcome",
    "match_instances",
    "masks_from_id_map",
    "mi_dsc",
    "mi_nsd",
    "FrameScore",
    "score_frame",
    "aggregate_percentile",
    "aggregate_scores",
    "AggregateReport",
    "bootstrap_ranking",
    "RankingReport",
    "measure_fps",
    "FPSReport",
]
