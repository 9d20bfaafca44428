"""Dataset representation: boxes, contours, splits, COCO round trips."""

import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from protoseg.data import (
    DatasetManifest,
    FrameRecord,
    InstanceAnnotation,
    export_coco,
    fill_polygons,
    filter_empty_frames,
    import_coco,
    instance_from_mask,
    mask_to_bbox,
    mask_to_contours,
    read_id_mask_png,
    split_train_val,
    write_id_mask_png,
)
from protoseg.errors import ConfigError, EmptyCorpusError, EmptyMaskError, ValidationWarning
from protoseg.seeding import rng_for


def _frame(frame_id, shape=(16, 16), boxes=()):
    image = np.zeros((*shape, 3), dtype=np.float64)
    instances = []
    for i, (r1, c1, r2, c2) in enumerate(boxes, start=1):
        mask = np.zeros(shape, dtype=bool)
        mask[r1 : r2 + 1, c1 : c2 + 1] = True
        instances.append(instance_from_mask(i, mask))
    return FrameRecord(frame_id=frame_id, image=image, instances=tuple(instances))


class TestMaskToBbox:
    def test_full_extent(self):
        assert mask_to_bbox(np.ones((4, 4), dtype=bool)) == (0, 0, 3, 3)

    def test_single_pixel(self):
        mask = np.zeros((6, 6), dtype=bool)
        mask[2, 3] = True
        assert mask_to_bbox(mask) == (3, 2, 3, 2)

    def test_empty_mask_raises(self):
        with pytest.raises(EmptyMaskError):
            mask_to_bbox(np.zeros((4, 4), dtype=bool))

    def test_matches_bruteforce_scan(self):
        rng = rng_for(0, "bbox-test")
        for _ in range(25):
            mask = rng.random((16, 16)) < 0.2
            if not mask.any():
                continue
            rows, cols = [], []
            for r in range(16):
                for c in range(16):
                    if mask[r, c]:
                        rows.append(r)
                        cols.append(c)
            expected = (min(cols), min(rows), max(cols), max(rows))
            assert mask_to_bbox(mask) == expected


class TestContours:
    def test_empty_mask(self):
        assert mask_to_contours(np.zeros((5, 5), dtype=bool)) == []

    def test_2x2_block(self):
        mask = np.zeros((4, 4), dtype=bool)
        mask[0:2, 0:2] = True
        polys = mask_to_contours(mask)
        assert len(polys) == 1
        assert len(polys[0]) == 4
        refilled = fill_polygons(polys, mask.shape)
        assert np.array_equal(refilled, mask)

    def test_two_disjoint_blocks(self):
        mask = np.zeros((8, 8), dtype=bool)
        mask[0:2, 0:2] = True
        mask[5:7, 5:8] = True
        polys = mask_to_contours(mask)
        assert len(polys) == 2
        assert np.array_equal(fill_polygons(polys, mask.shape), mask)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=0, max_value=2**63 - 1))
    def test_random_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        mask = rng.random((12, 12)) < rng.uniform(0.1, 0.6)
        polys = mask_to_contours(mask)
        assert np.array_equal(fill_polygons(polys, mask.shape), mask)


class TestFilterAndSplit:
    def test_all_empty_filtered_to_zero(self):
        manifest = DatasetManifest(frames=(_frame("a"), _frame("b")))
        assert len(filter_empty_frames(manifest)) == 0

    def test_no_empty_is_identity(self):
        manifest = DatasetManifest(
            frames=(_frame("a", boxes=[(1, 1, 3, 3)]), _frame("b", boxes=[(0, 0, 2, 2)]))
        )
        filtered = filter_empty_frames(manifest)
        assert [f.frame_id for f in filtered.frames] == ["a", "b"]

    def test_counts_track_empty_frames(self):
        manifest = DatasetManifest(frames=(_frame("a"), _frame("b", boxes=[(0, 0, 1, 1)])))
        assert manifest.counts == {"total": 2, "empty": 1}

    def test_full_fraction(self):
        manifest = DatasetManifest(frames=tuple(_frame(str(i)) for i in range(10)))
        train, val = split_train_val(manifest, 1.0, seed=0)
        assert (len(train), len(val)) == (10, 0)

    def test_same_seed_same_membership(self):
        manifest = DatasetManifest(frames=tuple(_frame(str(i)) for i in range(40)))
        a_train, a_val = split_train_val(manifest, 0.7, seed=9)
        b_train, b_val = split_train_val(manifest, 0.7, seed=9)
        assert [f.frame_id for f in a_train.frames] == [f.frame_id for f in b_train.frames]
        assert [f.frame_id for f in a_val.frames] == [f.frame_id for f in b_val.frames]

    def test_split_is_partition(self):
        manifest = DatasetManifest(frames=tuple(_frame(str(i)) for i in range(23)))
        train, val = split_train_val(manifest, 0.6, seed=3)
        ids = sorted(f.frame_id for f in train.frames) + sorted(f.frame_id for f in val.frames)
        assert sorted(ids) == sorted(str(i) for i in range(23))

    def test_half_up_rounding(self):
        manifest = DatasetManifest(frames=tuple(_frame(str(i)) for i in range(10)))
        train, val = split_train_val(manifest, 0.85, seed=0)
        # 8.5 rounds half-up to 9
        assert (len(train), len(val)) == (9, 1)

    def test_bad_fraction_rejected(self):
        manifest = DatasetManifest(frames=(_frame("a"),))
        for bad in (0.0, -0.1, 1.5):
            with pytest.raises(ConfigError):
                split_train_val(manifest, bad, seed=0)

    def test_empty_manifest_rejected(self):
        with pytest.raises(EmptyCorpusError):
            split_train_val(DatasetManifest(frames=()), 0.5, seed=0)


class TestCoco:
    def test_empty_manifest_round_trip(self, tmp_path):
        path = tmp_path / "ann.json"
        export_coco(DatasetManifest(frames=()), path)
        doc = json.loads(path.read_text())
        assert doc["annotations"] == []
        assert len(import_coco(path)) == 0

    def test_two_instances_export_fields(self, tmp_path):
        frame = _frame("f0", boxes=[(1, 1, 4, 6), (9, 2, 12, 5)])
        path = tmp_path / "ann.json"
        export_coco(DatasetManifest(frames=(frame,)), path)
        doc = json.loads(path.read_text())
        assert len(doc["annotations"]) == 2
        for ann in doc["annotations"]:
            assert ann["segmentation"]
            assert len(ann["bbox"]) == 4
            assert ann["area"] > 0
            assert ann["iscrowd"] == 0
        assert doc["images"][0]["file_name"] == "f0.png"

    def test_round_trip_masks_exact(self, tmp_path):
        rng = rng_for(4, "coco-test")
        shape = (16, 16)
        instances = []
        used = np.zeros(shape, dtype=bool)
        for i in range(1, 4):
            mask = (rng.random(shape) < 0.15) & ~used
            if not mask.any():
                continue
            used |= mask
            instances.append(instance_from_mask(i, mask))
        frame = FrameRecord(
            frame_id="rt", image=np.zeros((*shape, 3)), instances=tuple(instances)
        )
        path = tmp_path / "ann.json"
        export_coco(DatasetManifest(frames=(frame,)), path)
        back = import_coco(path)
        assert len(back.frames[0].instances) == len(instances)
        for orig, new in zip(instances, back.frames[0].instances):
            assert orig.instance_id == new.instance_id
            assert np.array_equal(orig.mask, new.mask)
            assert orig.bbox == new.bbox

    def test_bbox_mismatch_warns_with_frame_id(self, tmp_path):
        frame = _frame("bad-frame", boxes=[(2, 2, 5, 5)])
        path = tmp_path / "ann.json"
        export_coco(DatasetManifest(frames=(frame,)), path)
        doc = json.loads(path.read_text())
        doc["annotations"][0]["bbox"] = [0, 0, 2, 2]
        path.write_text(json.dumps(doc))
        with pytest.warns(ValidationWarning, match="bad-frame"):
            back = import_coco(path)
        # the mask-derived box wins over the stored one
        assert back.frames[0].instances[0].bbox == (2, 2, 5, 5)


class TestIdMaskPng:
    def test_round_trip_small_ids(self, tmp_path):
        ids = np.zeros((9, 9), dtype=np.int64)
        ids[2:5, 3:7] = 1
        ids[6:8, 0:2] = 2
        path = tmp_path / "m.png"
        write_id_mask_png(path, ids)
        assert np.array_equal(read_id_mask_png(path), ids)

    def test_round_trip_large_ids(self, tmp_path):
        ids = np.zeros((5, 5), dtype=np.int64)
        ids[0, 0] = 300
        path = tmp_path / "m.png"
        write_id_mask_png(path, ids)
        assert np.array_equal(read_id_mask_png(path), ids)

    def test_negative_ids_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_id_mask_png(tmp_path / "m.png", np.full((3, 3), -1))
