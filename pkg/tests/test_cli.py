"""Command line interface: subcommands, artifacts, exit codes."""

import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from protoseg.cli import main
from protoseg.config import load_config
from protoseg.data.coco import import_coco, write_id_mask_png

TINY = [
    "--set", "data.image_size=[64, 64]",
    "--set", "data.n_max=1",
    "--set", "data.empty_prob=0.0",
    "--set", "data.artifact_probs={}",
    "--set", "data.length_range=[24, 40]",
    "--set", "data.width_range=[5, 8]",
    "--set", "model.widths=[4, 4, 8, 8]",
    "--set", "model.fpn_width=8",
    "--set", "model.num_prototypes=4",
]


def run_ok(runner, args):
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    return result


def tree_hashes(root, skip=("config.yaml",)):
    root = Path(root)
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file() and path.name not in skip:
            out[str(path.relative_to(root))] = hashlib.sha256(
                path.read_bytes()
            ).hexdigest()
    return out


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def dataset_dir(runner, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "ds"
    run_ok(runner, ["synth", "--out", str(out), "--n", "3", "--seed", "5", *TINY])
    return out


@pytest.fixture(scope="module")
def run_dir(runner, tmp_path_factory, dataset_dir):
    out = tmp_path_factory.mktemp("cli-train") / "run"
    run_ok(
        runner,
        [
            "train", "--dataset", str(dataset_dir), "--out", str(out),
            "--seed", "0", *TINY,
            "--set", "train.iterations=30",
            "--set", "train.batch_size=2",
        ],
    )
    return out


class TestSynth:
    def test_writes_frames_masks_annotations_and_config(self, dataset_dir):
        assert len(list((dataset_dir / "images").glob("*.png"))) == 3
        assert len(list((dataset_dir / "masks").glob("*.png"))) == 3
        assert (dataset_dir / "annotations.json").exists()
        assert (dataset_dir / "config.yaml").exists()

    def test_reports_frame_counts(self, runner, tmp_path):
        out = tmp_path / "ds"
        result = run_ok(
            runner, ["synth", "--out", str(out), "--n", "2", "--seed", "1", *TINY]
        )
        assert "wrote 2 frames" in result.output

    def test_same_seed_reproduces_every_byte(self, runner, tmp_path, dataset_dir):
        out = tmp_path / "again"
        run_ok(runner, ["synth", "--out", str(out), "--n", "3", "--seed", "5", *TINY])
        assert tree_hashes(out) == tree_hashes(dataset_dir)

    def test_different_seed_changes_frames(self, runner, tmp_path, dataset_dir):
        out = tmp_path / "other"
        run_ok(runner, ["synth", "--out", str(out), "--n", "3", "--seed", "6", *TINY])
        assert tree_hashes(out) != tree_hashes(dataset_dir)

    def test_annotations_import_as_coco(self, dataset_dir):
        manifest = import_coco(dataset_dir / "annotations.json")
        assert manifest.counts["total"] == 3
        for frame in manifest.frames:
            for inst in frame.instances:
                x1, y1, x2, y2 = inst.bbox
                assert 0 <= x1 <= x2 < 64 and 0 <= y1 <= y2 < 64

    def test_unknown_override_key_exits_two(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["synth", "--out", str(tmp_path / "x"), "--n", "1",
             "--set", "data.resolution=[64, 64]"],
        )
        assert result.exit_code == 2
        assert "error: config" in result.output

    def test_unknown_artifact_kind_exits_two(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["synth", "--out", str(tmp_path / "x"), "--n", "1",
             "--set", "data.artifact_probs={confetti: 0.5}"],
        )
        assert result.exit_code == 2


class TestTrain:
    def test_writes_checkpoint_config_and_loss_log(self, run_dir):
        assert (run_dir / "checkpoint.psc").exists()
        assert (run_dir / "config.yaml").exists()
        log = run_dir / "loss_log.csv"
        with open(log, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 30
        assert set(rows[0]) == {"iteration", "L_cls", "L_box", "L_mask", "L_seg", "total"}

    def test_missing_dataset_dir_fails_cleanly(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["train", "--dataset", str(tmp_path / "nope"), "--out", str(tmp_path / "o")],
        )
        assert result.exit_code == 2


class TestEval:
    def test_checkpoint_over_dataset(self, runner, tmp_path, dataset_dir, run_dir):
        out = tmp_path / "eval"
        result = run_ok(
            runner,
            ["eval", "--checkpoint", str(run_dir / "checkpoint.psc"),
             "--dataset", str(dataset_dir), "--out", str(out)],
        )
        assert "MI_DSC" in result.output
        with open(out / "scores.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 3
        report = json.loads((out / "report.json").read_text())
        assert report["n_frames"] == 3
        assert report["algorithm"] == "model"
        pngs = sorted((out / "pred").glob("*.png"))
        sidecars = sorted((out / "pred").glob("*.json"))
        assert len(pngs) == 3 and len(sidecars) == 3

    def test_identical_mask_dirs_score_exactly_one(self, runner, tmp_path):
        gt_dir = tmp_path / "gt"
        pred_dir = tmp_path / "pred"
        gt_dir.mkdir()
        pred_dir.mkdir()
        rng = np.random.default_rng(2)
        for name in ("f0", "f1", "f2"):
            id_map = np.zeros((32, 32), dtype=np.int64)
            id_map[2:9, 3:10] = 1
            r, c = rng.integers(12, 24, size=2)
            id_map[r : r + 6, c : c + 6] = 2
            write_id_mask_png(gt_dir / f"{name}.png", id_map)
            write_id_mask_png(pred_dir / f"{name}.png", id_map)
        out = tmp_path / "scored"
        result = run_ok(
            runner,
            ["eval", "--pred", str(pred_dir), "--gt", str(gt_dir), "--out", str(out),
             "--algorithm", "oracle"],
        )
        report = json.loads((out / "report.json").read_text())
        assert report["mi_dsc_aggregate"] == 1.0
        assert report["mi_nsd_aggregate"] == 1.0
        assert "oracle" in result.output
        with open(out / "scores.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert [row["frame_id"] for row in rows] == ["f0", "f1", "f2"]
        assert all(float(row["mi_dsc"]) == 1.0 for row in rows)

    def test_parallel_jobs_match_serial(self, runner, tmp_path):
        gt_dir = tmp_path / "gt"
        pred_dir = tmp_path / "pred"
        gt_dir.mkdir()
        pred_dir.mkdir()
        rng = np.random.default_rng(9)
        for i in range(4):
            gt = np.zeros((24, 24), dtype=np.int64)
            gt[1:8, 1:8] = 1
            pred = np.zeros((24, 24), dtype=np.int64)
            r, c = rng.integers(1, 4, size=2)
            pred[r : r + 7, c : c + 7] = 1
            write_id_mask_png(gt_dir / f"f{i}.png", gt)
            write_id_mask_png(pred_dir / f"f{i}.png", pred)
        out1, out2 = tmp_path / "serial", tmp_path / "parallel"
        run_ok(runner, ["eval", "--pred", str(pred_dir), "--gt", str(gt_dir),
                        "--out", str(out1), "--jobs", "1"])
        run_ok(runner, ["eval", "--pred", str(pred_dir), "--gt", str(gt_dir),
                        "--out", str(out2), "--jobs", "3"])
        assert (out1 / "scores.csv").read_bytes() == (out2 / "scores.csv").read_bytes()

    def test_mismatched_directories_exit_two(self, runner, tmp_path):
        gt_dir = tmp_path / "gt"
        pred_dir = tmp_path / "pred"
        gt_dir.mkdir()
        pred_dir.mkdir()
        id_map = np.ones((16, 16), dtype=np.int64)
        write_id_mask_png(gt_dir / "a.png", id_map)
        write_id_mask_png(pred_dir / "b.png", id_map)
        result = runner.invoke(
            main,
            ["eval", "--pred", str(pred_dir), "--gt", str(gt_dir),
             "--out", str(tmp_path / "o")],
        )
        assert result.exit_code == 2

    def test_requires_exactly_one_input_mode(self, runner, tmp_path, dataset_dir):
        result = runner.invoke(
            main, ["eval", "--dataset", str(dataset_dir), "--out", str(tmp_path / "o")]
        )
        assert result.exit_code == 2


class TestOptimizeAnchors:
    def test_fragment_from_dataset_loads_as_config(self, runner, tmp_path, dataset_dir):
        frag = tmp_path / "anchors.yaml"
        result = run_ok(
            runner,
            ["optimize-anchors", "--dataset", str(dataset_dir), "--out", str(frag),
             "--generations", "4", "--population", "8", "--seed", "0"],
        )
        assert "fitness" in result.output
        data = yaml.safe_load(frag.read_text())
        scales = data["anchors"]["scales"]
        ratios = data["anchors"]["ratios"]
        assert len(scales) == 5 and len(ratios) == 5
        assert scales == sorted(scales)
        cfg = load_config(frag)
        assert cfg.network_config().scales == tuple(scales)

    def test_fragment_from_coco_boxes(self, runner, tmp_path, dataset_dir):
        frag = tmp_path / "anchors_boxes.yaml"
        run_ok(
            runner,
            ["optimize-anchors", "--boxes", str(dataset_dir / "annotations.json"),
             "--out", str(frag), "--generations", "3", "--population", "8"],
        )
        assert yaml.safe_load(frag.read_text())["anchors"]["scales"]

    def test_requires_exactly_one_corpus_source(self, runner, tmp_path, dataset_dir):
        result = runner.invoke(
            main,
            ["optimize-anchors", "--dataset", str(dataset_dir),
             "--boxes", str(dataset_dir / "annotations.json"),
             "--out", str(tmp_path / "f.yaml")],
        )
        assert result.exit_code == 2


class TestBenchmark:
    def test_timing_report(self, runner, tmp_path, dataset_dir, run_dir):
        out = tmp_path / "timing.json"
        result = run_ok(
            runner,
            ["benchmark", "--checkpoint", str(run_dir / "checkpoint.psc"),
             "--dataset", str(dataset_dir), "--runs", "3", "--out", str(out)],
        )
        assert result.output.startswith("benchmark: mean")
        report = json.loads(out.read_text())
        assert report["n_frames"] == 3
        assert len(report["runs"]) == 3
        assert report["mean_fps"] == pytest.approx(
            sum(report["runs"]) / 3, rel=1e-9
        )

    def test_zero_runs_exit_two(self, runner, tmp_path, dataset_dir, run_dir):
        result = runner.invoke(
            main,
            ["benchmark", "--checkpoint", str(run_dir / "checkpoint.psc"),
             "--dataset", str(dataset_dir), "--runs", "0"],
        )
        assert result.exit_code == 2


def write_scores_csv(path, scores):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame_id", "mi_dsc", "mi_nsd"])
        for i, s in enumerate(scores):
            writer.writerow([f"f{i}", repr(s), repr(s)])


class TestRank:
    def test_dominant_algorithm_ranks_first_everywhere(self, runner, tmp_path):
        strong = tmp_path / "strong.csv"
        weak = tmp_path / "weak.csv"
        write_scores_csv(strong, [0.9] * 12)
        write_scores_csv(weak, [0.2] * 12)
        out = tmp_path / "ranking"
        result = run_ok(
            runner,
            ["rank", "--scores", f"strong={strong}", "--scores", f"weak={weak}",
             "--bootstrap", "40", "--out", str(out), "--seed", "0"],
        )
        summary = json.loads((out / "ranking.json").read_text())
        assert summary["algorithms"] == ["strong", "weak"]
        assert summary["median_ranks"] == [1.0, 2.0]
        assert summary["histograms"]["strong"] == {"1.0": 40}
        assert "strong=1" in result.output
        with open(out / "rank_matrix.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["strong", "weak"]
        assert len(rows) == 41

    def test_same_seed_reproduces_matrix_bytes(self, runner, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        rng = np.random.default_rng(4)
        write_scores_csv(a, [float(v) for v in rng.random(10)])
        write_scores_csv(b, [float(v) for v in rng.random(10)])
        args = ["rank", "--scores", f"a={a}", "--scores", f"b={b}",
                "--bootstrap", "25", "--seed", "7"]
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        run_ok(runner, args + ["--out", str(out1)])
        run_ok(runner, args + ["--out", str(out2)])
        assert (out1 / "rank_matrix.csv").read_bytes() == (
            out2 / "rank_matrix.csv"
        ).read_bytes()

    def test_no_scores_exit_two(self, runner, tmp_path):
        result = runner.invoke(main, ["rank", "--out", str(tmp_path / "o")])
        assert result.exit_code == 2

    def test_duplicate_name_exit_two(self, runner, tmp_path):
        path = tmp_path / "s.csv"
        write_scores_csv(path, [0.5, 0.6])
        result = runner.invoke(
            main,
            ["rank", "--scores", f"x={path}", "--scores", f"x={path}",
             "--out", str(tmp_path / "o")],
        )
        assert result.exit_code == 2

    def test_missing_file_exit_two(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["rank", "--scores", f"x={tmp_path / 'absent.csv'}",
             "--out", str(tmp_path / "o")],
        )
        assert result.exit_code == 2

    def test_missing_metric_column_exit_two(self, runner, tmp_path):
        path = tmp_path / "s.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame_id", "accuracy"])
            writer.writerow(["f0", "0.5"])
        result = runner.invoke(
            main, ["rank", "--scores", f"x={path}", "--out", str(tmp_path / "o")]
        )
        assert result.exit_code == 2


class TestPlot:
    def test_score_distributions(self, runner, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        write_scores_csv(a, [0.2, 0.4, 0.6])
        write_scores_csv(b, [0.5, 0.7, 0.9])
        out = tmp_path / "plots"
        run_ok(
            runner,
            ["plot", "--scores", f"a={a}", "--scores", f"b={b}", "--out", str(out)],
        )
        payload = json.loads((out / "boxplot_mi_dsc.json").read_text())
        assert [s["algorithm"] for s in payload["series"]] == ["a", "b"]
        assert payload["series"][0]["scores"] == [0.2, 0.4, 0.6]
        assert (out / "boxplot_mi_nsd.json").exists()

    def test_loss_curve_smoothing(self, runner, tmp_path, run_dir):
        out = tmp_path / "plots"
        run_ok(
            runner,
            ["plot", "--loss-log", str(run_dir / "loss_log.csv"), "--out", str(out)],
        )
        with open(out / "loss_curve.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 30
        assert "total_smoothed" in rows[0]
        assert float(rows[0]["total_smoothed"]) == pytest.approx(
            float(rows[0]["total"]), rel=1e-4
        )

    def test_nothing_to_plot_exit_two(self, runner, tmp_path):
        result = runner.invoke(main, ["plot", "--out", str(tmp_path / "o")])
        assert result.exit_code == 2
