"""Differential-evolution search over anchor scales and aspect ratios.

A genome is n scales followed by n ratios (5 + 5 by default). Fitness is
the mean, over a corpus of ground-truth boxes, of the best shape-IoU
against the scale x ratio anchor shapes with centers aligned, so it
measures pure shape coverage independent of where anchors sit. The optimizer is classic
rand/1/bin: mutation v = a + F * (b - c), binomial crossover at rate CR,
greedy selection, bounds enforced by clipping. Scales come back sorted
ascending.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCorpusError
from .seeding import rng_for

N_SCALES = 5
N_RATIOS = 5

# Scale genes carry per-level lower bounds: a level with an n x n anchor
# grid quantizes positions to 1/n, so an anchor whose side falls below
# about 1.5/n can never reach the 0.5 matching IoU at the worst-case
# offset. The defaults encode the standard five-level head with grids
# 12, 6, 3, 2, 1. Monotone windows keep the sorted genome in bounds.
DEFAULT_SCALE_BOUNDS = (
    (0.125, 0.95),
    (0.25, 0.95),
    (0.50, 0.95),
    (0.75, 0.95),
    (0.90, 0.95),
)
DEFAULT_RATIO_BOUNDS = (0.2, 5.0)


def _normalize_bounds(bounds, n: int, label: str) -> np.ndarray:
    """(lo, hi) applied to all genes, or one (lo, hi) pair per gene."""
    arr = np.asarray(bounds, dtype=np.float64)
    if arr.shape == (2,):
        arr = np.tile(arr, (n, 1))
    if arr.shape != (n, 2):
        raise ValueError(
            f"{label} must be one (lo, hi) pair or {n} of them, got shape {arr.shape}"
        )
    if (arr[:, 0] >= arr[:, 1]).any():
        raise ValueError(f"{label} need lo < hi in every pair")
    return arr


@dataclass(frozen=True)
class DEConfig:
    population: int = 30
    differential_weight: float = 0.5  # F
    crossover_rate: float = 0.9  # CR
    generations: int = 200
    scale_bounds: tuple = DEFAULT_SCALE_BOUNDS
    ratio_bounds: tuple = DEFAULT_RATIO_BOUNDS
    n_scales: int = N_SCALES
    n_ratios: int = N_RATIOS
    seed: int = 0

    def validate(self) -> None:
        if self.population < 4:
            raise ValueError("rand/1 mutation needs a population of >= 4")
        if not 0.0 < self.differential_weight <= 2.0:
            raise ValueError(f"F must be in (0, 2], got {self.differential_weight}")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError(f"CR must be in [0, 1], got {self.crossover_rate}")
        if self.generations < 1:
            raise ValueError("need >= 1 generation")
        if self.n_scales < 1 or self.n_ratios < 1:
            raise ValueError("need at least one scale gene and one ratio gene")
        self.gene_bounds()

    def gene_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """(lo, hi) arrays over the full genome (scales then ratios)."""
        scale = _normalize_bounds(self.scale_bounds, self.n_scales, "scale_bounds")
        ratio = _normalize_bounds(self.ratio_bounds, self.n_ratios, "ratio_bounds")
        stacked = np.concatenate([scale, ratio], axis=0)
        return stacked[:, 0].copy(), stacked[:, 1].copy()


def _genome_shapes(genome: np.ndarray) -> np.ndarray:
    """(n*n, 2) anchor (w, h) pairs from the scale x ratio cross-product."""
    if genome.size % 2:
        raise ValueError(f"genome must hold equal scale and ratio counts, got {genome.size}")
    half = genome.size // 2
    scales = genome[:half]
    ratios = genome[half:]
    root = np.sqrt(ratios)
    w = scales[:, None] * root[None, :]
    h = scales[:, None] / root[None, :]
    return np.stack([w.ravel(), h.ravel()], axis=1)


def shape_iou(wh_a: np.ndarray, wh_b: np.ndarray) -> np.ndarray:
    """IoU of center-aligned boxes given (..., 2) width/height arrays."""
    inter = np.minimum(wh_a[..., 0], wh_b[..., 0]) * np.minimum(wh_a[..., 1], wh_b[..., 1])
    union = wh_a[..., 0] * wh_a[..., 1] + wh_b[..., 0] * wh_b[..., 1] - inter
    return inter / union


def anchor_fitness(genome: np.ndarray, gt_wh: np.ndarray) -> float:
    """Mean over boxes of the best shape-IoU against the genome's 25 shapes."""
    gt_wh = np.asarray(gt_wh, dtype=np.float64).reshape(-1, 2)
    if gt_wh.shape[0] == 0:
        raise EmptyCorpusError("anchor fitness needs at least one ground-truth box")
    shapes = _genome_shapes(np.asarray(genome, dtype=np.float64))
    ious = shape_iou(gt_wh[:, None, :], shapes[None, :, :])  # (n_boxes, 25)
    return float(ious.max(axis=1).mean())


def recall_at(genome: np.ndarray, gt_wh: np.ndarray, threshold: float = 0.5) -> float:
    """Fraction of boxes whose best shape-IoU clears the threshold."""
    gt_wh = np.asarray(gt_wh, dtype=np.float64).reshape(-1, 2)
    if gt_wh.shape[0] == 0:
        raise EmptyCorpusError("recall needs at least one ground-truth box")
    shapes = _genome_shapes(np.asarray(genome, dtype=np.float64))
    ious = shape_iou(gt_wh[:, None, :], shapes[None, :, :])
    return float((ious.max(axis=1) >= threshold).mean())


def _repair(genome: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.clip(genome, lo, hi)


def _sorted_genome(genome: np.ndarray, lo: np.ndarray, hi: np.ndarray, n_scales: int) -> np.ndarray:
    """Sort scales ascending, then re-clip: the per-gene windows are
    monotone, so clipping a sorted sequence keeps it sorted."""
    out = genome.copy()
    out[:n_scales] = np.sort(out[:n_scales])
    return np.clip(out, lo, hi)


def de_optimize(gt_wh: np.ndarray, config: DEConfig = DEConfig()):
    """Returns (best genome with sorted scales, per-generation best-fitness trace)."""
    config.validate()
    gt_wh = np.asarray(gt_wh, dtype=np.float64).reshape(-1, 2)
    if gt_wh.shape[0] == 0:
        raise EmptyCorpusError("differential evolution needs a non-empty box corpus")
    rng = rng_for(config.seed, "de")
    n = config.population
    dim = config.n_scales + config.n_ratios

    lo, hi = config.gene_bounds()
    population = rng.uniform(lo, hi, size=(n, dim))
    fitness = np.array([anchor_fitness(g, gt_wh) for g in population])

    trace = [float(fitness.max())]
    for _ in range(config.generations):
        for i in range(n):
            choices = [j for j in range(n) if j != i]
            a, b, c = rng.choice(choices, size=3, replace=False)
            mutant = population[a] + config.differential_weight * (population[b] - population[c])
            mutant = _repair(mutant, lo, hi)
            cross = rng.random(dim) < config.crossover_rate
            cross[rng.integers(dim)] = True  # guarantee >= 1 mutant gene
            trial = np.where(cross, mutant, population[i])
            trial_fit = anchor_fitness(trial, gt_wh)
            if trial_fit >= fitness[i]:
                population[i] = trial
                fitness[i] = trial_fit
        trace.append(float(fitness.max()))

    best = _sorted_genome(population[int(fitness.argmax())], lo, hi, config.n_scales)
    return best, np.asarray(trace)


def corpus_from_manifest(manifest) -> np.ndarray:
    """Normalized (w, h) pairs of every instance box in a dataset."""
    pairs = []
    for frame in manifest.frames:
        h, w = frame.image.shape[:2]
        for inst in frame.instances:
            x1, y1, x2, y2 = inst.bbox
            pairs.append(((x2 - x1 + 1) / w, (y2 - y1 + 1) / h))
    return np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
