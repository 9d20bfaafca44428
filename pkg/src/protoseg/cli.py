"""Command line interface.

Every subcommand accepts --config (YAML), repeated --set dotted overrides,
and --seed. Exit code 2 means the configuration or an input file was bad;
exit code 1 means the run itself failed. Errors print a single
machine-parsable line on stderr: ``error: <kind>: <message>``.
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import click
import numpy as np
import yaml

from .anchor_opt import DEConfig, anchor_fitness, corpus_from_manifest, de_optimize, recall_at
from .config import load_config
from .data.coco import import_coco, read_id_mask_png, write_id_mask_png
from .errors import ConfigError, ParseError, ProtosegError
from .inference import instances_to_id_map, load_model, predict
from .metrics.aggregate import aggregate_percentile, bootstrap_ranking
from .metrics.fps import measure_fps
from .metrics.instances import masks_from_id_map, score_frame
from .synth.dataset import build_dataset, load_dataset, save_dataset
from .train.loop import LOSS_COLUMNS, train


def _config_options(fn):
    fn = click.option(
        "--set",
        "overrides",
        multiple=True,
        metavar="KEY=VALUE",
        help="Override a config entry by dotted path, e.g. train.lr=0.01.",
    )(fn)
    fn = click.option(
        "--config",
        "config_path",
        type=click.Path(dir_okay=False),
        default=None,
        help="YAML run configuration.",
    )(fn)
    fn = click.option("--seed", type=int, default=None, help="Master seed override.")(fn)
    return fn


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, ParseError) as exc:
            click.echo(f"error: config: {exc}", err=True)
            sys.exit(2)
        except ProtosegError as exc:
            click.echo(f"error: runtime: {exc}", err=True)
            sys.exit(1)
        except OSError as exc:
            click.echo(f"error: io: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
def main():
    """Prototype-based instrument segmentation toolkit."""


@main.command()
@_config_options
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--n", type=int, default=None, help="Frame count (defaults to data.n_train).")
@_guarded
def synth(config_path, overrides, seed, out, n):
    """Generate a synthetic dataset directory."""
    cfg = load_config(config_path, overrides, seed=seed, out=out)
    count = int(n) if n is not None else int(cfg.resolved["data"]["n_train"])
    manifest = build_dataset(cfg.scene_config(), None, count, cfg.seed)
    save_dataset(manifest, out)
    cfg.freeze(Path(out) / "config.yaml")
    click.echo(
        f"synth: wrote {manifest.counts['total']} frames "
        f"({manifest.counts['empty']} empty) to {out}"
    )


@main.command("train")
@_config_options
@click.option(
    "--dataset",
    "dataset_dir",
    required=True,
    type=click.Path(exists=True, file_okay=False),
)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@_guarded
def train_cmd(config_path, overrides, seed, dataset_dir, out):
    """Train a model on a dataset directory; writes checkpoint and loss log."""
    cfg = load_config(config_path, overrides, seed=seed, out=out)
    manifest = load_dataset(dataset_dir)
    cfg.freeze(Path(out) / "config.yaml")
    model, history = train(
        cfg.network_config(),
        cfg.train_config(),
        manifest,
        augment=cfg.augment_config(),
        out_dir=out,
    )
    last = history[-1]
    click.echo(
        f"train: {len(history)} iterations, final total loss {last['total']:.4f}, "
        f"checkpoint at {Path(out) / 'checkpoint.psc'}"
    )


def _write_scores_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_id", "mi_dsc", "mi_nsd"])
        for row in rows:
            writer.writerow([row.frame_id, repr(row.mi_dsc), repr(row.mi_nsd)])


def _score_mask_dirs(pred_dir, gt_dir, tau, jobs):
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    pred_names = {p.stem for p in pred_dir.glob("*.png")}
    gt_names = {p.stem for p in gt_dir.glob("*.png")}
    if not gt_names:
        raise ConfigError(f"no ground-truth mask PNGs in {gt_dir}")
    if pred_names != gt_names:
        missing = sorted(gt_names - pred_names)[:5]
        extra = sorted(pred_names - gt_names)[:5]
        raise ConfigError(
            f"prediction and ground-truth directories disagree "
            f"(missing from pred: {missing}, unmatched in pred: {extra})"
        )

    def one(name: str):
        pred = masks_from_id_map(read_id_mask_png(pred_dir / f"{name}.png"))
        gt = masks_from_id_map(read_id_mask_png(gt_dir / f"{name}.png"))
        return score_frame(name, pred, gt, tau=tau)

    names = sorted(gt_names)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, names))
    return [one(name) for name in names]


@main.command("eval")
@_config_options
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option(
    "--dataset", "dataset_dir", type=click.Path(exists=True, file_okay=False), default=None
)
@click.option("--pred", "pred_dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--gt", "gt_dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--algorithm", default="model", help="Label used in reports.")
@click.option("--jobs", type=int, default=1, help="Parallel frame-scoring workers.")
@_guarded
def eval_cmd(config_path, overrides, seed, checkpoint, dataset_dir, pred_dir, gt_dir, out, algorithm, jobs):
    """Score predictions against ground truth.

    Either run a checkpoint over a dataset directory (--checkpoint with
    --dataset; also exports predicted id masks), or score two existing
    directories of instance-id PNGs with matching filenames (--pred with
    --gt).
    """
    cfg = load_config(config_path, overrides, seed=seed)
    ev = cfg.resolved["eval"]
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)

    model_mode = checkpoint is not None and dataset_dir is not None
    dir_mode = pred_dir is not None and gt_dir is not None
    if model_mode == dir_mode:
        raise ConfigError("pass either --checkpoint with --dataset, or --pred with --gt")

    if model_mode:
        model, _, _ = load_model(checkpoint)
        manifest = load_dataset(dataset_dir)
        mask_dir = out / "pred"
        mask_dir.mkdir(exist_ok=True)
        rows = []
        for frame in manifest.frames:
            instances = predict(
                model,
                frame.image,
                score_threshold=float(ev["score_threshold"]),
                iou_threshold=float(ev["iou_threshold"]),
                top_k=int(ev["top_k"]),
            )
            id_map = instances_to_id_map(instances, frame.image.shape[:2])
            write_id_mask_png(mask_dir / f"{frame.frame_id}.png", id_map)
            sidecar = [
                {
                    "instance_id": i + 1,
                    "score": inst.score,
                    "box": [float(v) for v in inst.box],
                }
                for i, inst in enumerate(instances)
            ]
            (mask_dir / f"{frame.frame_id}.json").write_text(json.dumps(sidecar, indent=1))
            gt_masks = [inst.mask for inst in frame.instances]
            rows.append(
                score_frame(
                    frame.frame_id, masks_from_id_map(id_map), gt_masks, tau=float(ev["tau"])
                )
            )
    else:
        rows = _score_mask_dirs(pred_dir, gt_dir, float(ev["tau"]), jobs)

    _write_scores_csv(out / "scores.csv", rows)
    p = float(ev["percentile"])
    report = {
        "algorithm": algorithm,
        "n_frames": len(rows),
        "percentile": p,
        "mi_dsc_aggregate": aggregate_percentile([r.mi_dsc for r in rows], p),
        "mi_nsd_aggregate": aggregate_percentile([r.mi_nsd for r in rows], p),
    }
    (out / "report.json").write_text(json.dumps(report, indent=1))
    click.echo(
        f"eval: {algorithm} MI_DSC[p{p:g}]={report['mi_dsc_aggregate']:.4f} "
        f"MI_NSD[p{p:g}]={report['mi_nsd_aggregate']:.4f} over {len(rows)} frames"
    )


@main.command("optimize-anchors")
@_config_options
@click.option("--boxes", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Annotation JSON holding the box corpus.")
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Dataset directory holding the box corpus.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--generations", type=int, default=None)
@click.option("--population", type=int, default=None)
@_guarded
def optimize_anchors(config_path, overrides, seed, boxes, dataset_dir, out, generations, population):
    """Fit anchor scales and ratios to a box corpus; writes a YAML fragment."""
    cfg = load_config(config_path, overrides, seed=seed)
    if (boxes is None) == (dataset_dir is None):
        raise ConfigError("pass exactly one of --boxes or --dataset")
    manifest = import_coco(boxes) if boxes is not None else load_dataset(dataset_dir)
    corpus = corpus_from_manifest(manifest)
    de = DEConfig(seed=cfg.seed)
    if generations is not None:
        de = replace(de, generations=generations)
    if population is not None:
        de = replace(de, population=population)
    genome, trace = de_optimize(corpus, de)
    scales = [float(v) for v in genome[:5]]
    ratios = [float(v) for v in genome[5:]]
    fragment = yaml.safe_dump({"anchors": {"scales": scales, "ratios": ratios}}, sort_keys=False)
    header = (
        f"# fitted to {corpus.shape[0]} boxes over {de.generations} generations "
        f"(seed {cfg.seed})\n"
        f"# fitness {anchor_fitness(genome, corpus):.6f}, "
        f"recall@0.5 {recall_at(genome, corpus):.6f}, "
        f"start fitness {trace[0]:.6f}\n"
    )
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(header + fragment)
    click.echo(
        f"optimize-anchors: fitness {trace[-1]:.4f} after {de.generations} generations, "
        f"fragment at {out}"
    )


@main.command()
@_config_options
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", "dataset_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--runs", type=int, default=10, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the timing report as JSON.")
@_guarded
def benchmark(config_path, overrides, seed, checkpoint, dataset_dir, runs, out):
    """Measure end-to-end frames per second on a dataset."""
    cfg = load_config(config_path, overrides, seed=seed)
    ev = cfg.resolved["eval"]
    model, _, _ = load_model(checkpoint)
    manifest = load_dataset(dataset_dir)
    frames = [frame.image for frame in manifest.frames]

    def infer(image):
        predict(
            model,
            image,
            score_threshold=float(ev["score_threshold"]),
            iou_threshold=float(ev["iou_threshold"]),
            top_k=int(ev["top_k"]),
        )

    try:
        report = measure_fps(infer, frames, runs=runs)
    except ValueError as exc:
        raise ConfigError(str(exc))
    if out is not None:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(
            json.dumps(
                {
                    "n_frames": len(frames),
                    "runs": list(report.per_run),
                    "mean_fps": report.mean,
                },
                indent=1,
            )
        )
    per_run = " ".join(f"{r:.2f}" for r in report.per_run)
    click.echo(f"benchmark: mean {report.mean:.2f} fps over {runs} runs [{per_run}]")


def _load_score_tables(score_specs, metric):
    tables = {}
    for spec in score_specs:
        if "=" not in spec:
            raise ConfigError(f"--scores needs NAME=PATH, got {spec!r}")
        name, path = spec.split("=", 1)
        if name in tables:
            raise ConfigError(f"duplicate algorithm name {name!r}")
        try:
            with open(path, newline="") as fh:
                reader = csv.DictReader(fh)
                if reader.fieldnames is None or metric not in reader.fieldnames:
                    raise ConfigError(f"{path} has no {metric!r} column")
                tables[name] = {row["frame_id"]: float(row[metric]) for row in reader}
        except FileNotFoundError:
            raise ConfigError(f"scores file not found: {path}")
        except ValueError as exc:
            raise ParseError(f"bad score value: {exc}", path=str(path))
    if not tables:
        raise ConfigError("need at least one --scores NAME=PATH")
    return tables


@main.command()
@_config_options
@click.option("--scores", "score_specs", multiple=True, metavar="NAME=PATH",
              help="Per-frame scores CSV for one algorithm; repeatable.")
@click.option("--metric", type=click.Choice(["mi_dsc", "mi_nsd"]), default="mi_dsc",
              show_default=True)
@click.option("--bootstrap", "b", type=int, default=1000, show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@_guarded
def rank(config_path, overrides, seed, score_specs, metric, b, out):
    """Bootstrap-rank algorithms from their per-frame score files."""
    cfg = load_config(config_path, overrides, seed=seed)
    tables = _load_score_tables(score_specs, metric)
    report = bootstrap_ranking(
        tables, b=b, seed=cfg.seed, p=float(cfg.resolved["eval"]["percentile"])
    )
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "rank_matrix.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(report.algorithms)
        for row in report.ranks:
            writer.writerow([repr(float(v)) for v in row])
    summary = {
        "metric": metric,
        "bootstrap_samples": b,
        "algorithms": list(report.algorithms),
        "median_ranks": [float(v) for v in report.median_ranks],
        "histograms": {a: report.histogram(a) for a in report.algorithms},
    }
    (out / "ranking.json").write_text(json.dumps(summary, indent=1))
    medians = ", ".join(
        f"{a}={m:g}" for a, m in zip(report.algorithms, report.median_ranks)
    )
    click.echo(f"rank: median ranks over {b} samples: {medians}")


@main.command()
@_config_options
@click.option("--scores", "score_specs", multiple=True, metavar="NAME=PATH",
              help="Per-frame scores CSV for one algorithm; repeatable.")
@click.option("--loss-log", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@_guarded
def plot(config_path, overrides, seed, score_specs, loss_log, out):
    """Emit plot-ready data: score distributions and smoothed loss curves."""
    cfg = load_config(config_path, overrides, seed=seed)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if not score_specs and loss_log is None:
        raise ConfigError("nothing to plot: pass --scores and/or --loss-log")
    written = []
    p = float(cfg.resolved["eval"]["percentile"])
    for metric in ("mi_dsc", "mi_nsd"):
        if not score_specs:
            break
        tables = _load_score_tables(score_specs, metric)
        payload = []
        for name in sorted(tables):
            scores = [tables[name][fid] for fid in sorted(tables[name])]
            payload.append(
                {
                    "algorithm": name,
                    "scores": scores,
                    "aggregate": aggregate_percentile(scores, p),
                }
            )
        path = out / f"boxplot_{metric}.json"
        path.write_text(json.dumps({"metric": metric, "percentile": p, "series": payload}, indent=1))
        written.append(path.name)
    if loss_log is not None:
        with open(loss_log, newline="") as fh:
            rows = list(csv.DictReader(fh))
        missing = [c for c in LOSS_COLUMNS if rows and c not in rows[0]]
        if missing:
            raise ParseError(f"loss log missing columns {missing}", path=str(loss_log))
        totals = np.array([float(r["total"]) for r in rows])
        window = max(1, min(25, len(totals)))
        kernel = np.ones(window) / window
        padded = np.concatenate([np.full(window - 1, totals[0] if len(totals) else 0.0), totals])
        smoothed = np.convolve(padded, kernel, mode="valid")
        path = out / "loss_curve.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(LOSS_COLUMNS) + ["total_smoothed"])
            for row, s in zip(rows, smoothed):
                writer.writerow([row[c] for c in LOSS_COLUMNS] + [f"{s:.6f}"])
        written.append(path.name)
    click.echo(f"plot: wrote {', '.join(written)} to {out}")


if __name__ == "__main__":
    main()
