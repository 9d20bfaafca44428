"""Prototype bank, prediction head, NMS and mask assembly."""

import numpy as np
import pytest
import torch

from protoseg import kernels
from protoseg.errors import ShapeError
from protoseg.model import ProtoNet, PredictionHead, assemble_masks, detect, generate_anchors
from protoseg.model.heads import Detection
from protoseg.seeding import seed_torch


class TestProtoNet:
    def test_bank_shape_and_upsample(self):
        seed_torch(0)
        net = ProtoNet(in_channels=8, k=5)
        x = torch.randn((2, 8, 6, 6), dtype=torch.float64)
        assert net(x, stride=4).shape == (2, 5, 6, 6)
        assert net(x, stride=8).shape == (2, 5, 12, 12)

    def test_bank_is_nonnegative(self):
        seed_torch(1)
        net = ProtoNet(in_channels=4, k=8)
        x = torch.randn((1, 4, 10, 10), dtype=torch.float64) * 3
        assert (net(x) >= 0).all()

    def test_zero_parameters_give_zero_bank(self):
        net = ProtoNet(in_channels=4, k=3)
        with torch.no_grad():
            for p in net.parameters():
                p.zero_()
        out = net(torch.randn((1, 4, 6, 6), dtype=torch.float64))
        assert torch.equal(out, torch.zeros_like(out))

    def test_nearest_upsample_repeats_cells(self):
        seed_torch(2)
        net = ProtoNet(in_channels=4, k=2)
        x = torch.randn((1, 4, 3, 3), dtype=torch.float64)
        small = net(x, stride=4)
        big = net(x, stride=8)
        assert torch.equal(big[:, :, ::2, ::2], small)
        assert torch.equal(big[:, :, 1::2, 1::2], small)

    def test_invalid_k_rejected(self):
        with pytest.raises(ValueError):
            ProtoNet(in_channels=4, k=0)


class TestPredictionHead:
    def test_output_counts(self):
        seed_torch(3)
        head = PredictionHead(in_channels=8, num_ratios=5, k=8)
        levels = [
            torch.randn((2, 8, 4, 4), dtype=torch.float64),
            torch.randn((2, 8, 2, 2), dtype=torch.float64),
        ]
        cls, box, coef = head(levels)
        n = (16 + 4) * 5
        assert cls.shape == (2, n, 2)
        assert box.shape == (2, n, 4)
        assert coef.shape == (2, n, 8)

    def test_coefficients_in_open_unit_ball(self):
        seed_torch(4)
        head = PredictionHead(in_channels=4, num_ratios=3, k=6)
        _, _, coef = head([torch.randn((1, 4, 5, 5), dtype=torch.float64) * 10])
        assert (coef > -1).all() and (coef < 1).all()

    def test_weights_shared_across_levels(self):
        seed_torch(5)
        head = PredictionHead(in_channels=4, num_ratios=2, k=3)
        x = torch.randn((1, 4, 3, 3), dtype=torch.float64)
        together = head([x, x])
        alone = head([x])
        for t, a in zip(together, alone):
            n = a.shape[1]
            assert torch.allclose(t[:, :n], a)
            assert torch.allclose(t[:, n:], a)

    def test_anchor_axis_is_position_major(self):
        # predictions flatten (H, W, ratio), positions advancing slowest
        head = PredictionHead(in_channels=2, num_ratios=2, k=1)
        with torch.no_grad():
            for p in head.parameters():
                p.zero_()
            # box branch channels are (ratio, coord); mark ratio 1, coord 0
            head.box_branch.bias[4] = 7.0
        _, box, _ = head([torch.zeros((1, 2, 2, 2), dtype=torch.float64)])
        assert box.shape == (1, 8, 4)
        marked = box[0, :, 0]
        expected = torch.tensor(
            [0.0, 7.0, 0.0, 7.0, 0.0, 7.0, 0.0, 7.0], dtype=torch.float64
        )
        assert torch.equal(marked, expected)


class TestDetect:
    def _anchors(self, n_cells=2):
        return generate_anchors([(n_cells, n_cells)], (0.5,), (1.0,))

    def _logits(self, scores, anchors):
        # inverse-sigmoid the foreground probability into a 2-class logit gap
        logits = np.zeros((len(anchors), 2))
        s = np.asarray(scores, dtype=np.float64)
        logits[:, 1] = np.log(s) - np.log1p(-s)
        return logits

    def test_below_threshold_returns_empty(self):
        anchors = self._anchors()
        cls = self._logits([0.04, 0.01, 0.02, 0.0499], anchors)
        out = detect(cls, np.zeros((4, 4)), np.zeros((4, 3)), anchors)
        assert out == []

    def test_identical_boxes_keep_highest_score(self):
        anchors = generate_anchors([(1, 2)], (0.5,), (1.0,))
        # two anchors, same shape, different centers; zero deltas keep them
        # apart, so craft deltas that move both onto the same box
        cls = self._logits([0.6, 0.9], anchors)
        deltas = np.zeros((2, 4))
        # shift anchor 0 onto anchor 1's center: dx = (cx1 - cx0) / w
        dx = (anchors.boxes[1, 0] - anchors.boxes[0, 0]) / anchors.boxes[0, 2]
        deltas[0, 0] = dx
        coef = np.arange(6, dtype=np.float64).reshape(2, 3) / 10
        out = detect(cls, deltas, coef, anchors)
        assert len(out) == 1
        assert out[0].score == pytest.approx(0.9)
        assert np.allclose(out[0].coefficients, coef[1])

    def test_disjoint_boxes_both_survive(self):
        anchors = generate_anchors([(1, 2)], (0.4,), (1.0,))
        cls = self._logits([0.7, 0.8], anchors)
        out = detect(cls, np.zeros((2, 4)), np.zeros((2, 1)), anchors)
        assert len(out) == 2
        assert out[0].score >= out[1].score

    def test_matches_bruteforce_nms(self):
        rng = np.random.default_rng(9)
        anchors = generate_anchors([(3, 3)], (0.4,), (0.5, 1.0, 2.0))
        n = len(anchors)
        cls = rng.normal(size=(n, 2))
        deltas = rng.normal(size=(n, 4)) * 0.2
        coef = rng.uniform(-1, 1, size=(n, 4))
        out = detect(cls, deltas, coef, anchors, score_threshold=0.05,
                     iou_threshold=0.5, top_k=20)

        from protoseg.model.boxes import centers_to_boxes, decode_boxes

        shifted = cls - cls.max(axis=1, keepdims=True)
        probs = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
        scores = probs[:, 1]
        cand = np.flatnonzero(scores >= 0.05)
        corners = np.clip(
            centers_to_boxes(decode_boxes(deltas[cand], anchors.boxes[cand])), 0, 1
        )
        order = sorted(range(len(cand)), key=lambda i: (-scores[cand[i]], i))
        kept = []
        for i in order:
            ok = True
            for j in kept:
                inter_w = min(corners[i, 2], corners[j, 2]) - max(corners[i, 0], corners[j, 0])
                inter_h = min(corners[i, 3], corners[j, 3]) - max(corners[i, 1], corners[j, 1])
                inter = max(inter_w, 0) * max(inter_h, 0)
                a = (corners[i, 2] - corners[i, 0]) * (corners[i, 3] - corners[i, 1])
                b = (corners[j, 2] - corners[j, 0]) * (corners[j, 3] - corners[j, 1])
                if inter / (a + b - inter) > 0.5:
                    ok = False
                    break
            if ok:
                kept.append(i)
        expected_scores = [scores[cand[i]] for i in kept[:20]]
        assert [d.score for d in out] == pytest.approx(expected_scores)

    def test_top_k_truncates(self):
        anchors = generate_anchors([(3, 3)], (0.05,), (1.0,))
        cls = self._logits(np.linspace(0.2, 0.8, len(anchors)), anchors)
        out = detect(cls, np.zeros((9, 4)), np.zeros((9, 1)), anchors, top_k=4)
        assert len(out) == 4

    def test_anchor_count_mismatch_rejected(self):
        anchors = self._anchors()
        with pytest.raises(ShapeError):
            detect(np.zeros((3, 2)), np.zeros((3, 4)), np.zeros((3, 1)), anchors)


class TestAssembleMasks:
    def _bank(self):
        # k=1 indicator prototype: top-left 2x2 block of a 4x4 bank, value 10
        bank = np.zeros((1, 4, 4))
        bank[0, :2, :2] = 10.0
        return bank

    def test_zero_coefficients_give_empty_mask(self):
        det = Detection(score=0.9, box=(0.0, 0.0, 1.0, 1.0), coefficients=np.zeros(1))
        (inst,) = assemble_masks(self._bank(), [det], (8, 8))
        # sigmoid(0) = 0.5 and the threshold is strictly above 0.5
        assert not inst.mask.any()

    def test_indicator_prototype_intersects_box(self):
        det = Detection(score=0.9, box=(0.0, 0.0, 1.0, 1.0), coefficients=np.ones(1))
        (inst,) = assemble_masks(self._bank(), [det], (8, 8))
        expected = np.zeros((8, 8), dtype=bool)
        expected[:4, :4] = True  # 2x2 bank cells upsampled by factor 2
        assert np.array_equal(inst.mask, expected)

    def test_crop_removes_pixels_outside_box(self):
        det = Detection(score=0.9, box=(0.25, 0.0, 1.0, 1.0), coefficients=np.ones(1))
        (inst,) = assemble_masks(self._bank(), [det], (8, 8))
        expected = np.zeros((8, 8), dtype=bool)
        expected[:4, 2:4] = True  # columns 0-1 fall outside floor(0.25 * 8) = 2
        assert np.array_equal(inst.mask, expected)

    def test_crop_cells_use_floor_and_ceil(self):
        bank = np.full((1, 4, 4), 10.0)
        det = Detection(
            score=0.5, box=(0.3, 0.3, 0.55, 0.55), coefficients=np.ones(1)
        )
        (inst,) = assemble_masks(bank, [det], (8, 8))
        expected = np.zeros((8, 8), dtype=bool)
        expected[2:5, 2:5] = True  # floor(2.4) = 2, ceil(4.4) = 5
        assert np.array_equal(inst.mask, expected)

    def test_negative_coefficient_suppresses(self):
        det = Detection(score=0.9, box=(0.0, 0.0, 1.0, 1.0), coefficients=-np.ones(1))
        (inst,) = assemble_masks(self._bank(), [det], (8, 8))
        assert not inst.mask.any()

    def test_non_integral_upsample_rejected(self):
        det = Detection(score=0.9, box=(0.0, 0.0, 1.0, 1.0), coefficients=np.ones(1))
        with pytest.raises(ShapeError):
            assemble_masks(self._bank(), [det], (6, 8))

    def test_coefficient_count_mismatch_rejected(self):
        det = Detection(score=0.9, box=(0.0, 0.0, 1.0, 1.0), coefficients=np.ones(2))
        with pytest.raises(ShapeError):
            assemble_masks(self._bank(), [det], (8, 8))

    def test_scores_and_boxes_pass_through(self):
        dets = [
            Detection(score=0.7, box=(0.0, 0.0, 0.5, 0.5), coefficients=np.ones(1)),
            Detection(score=0.3, box=(0.5, 0.5, 1.0, 1.0), coefficients=np.ones(1)),
        ]
        out = assemble_masks(self._bank(), dets, (8, 8))
        assert [i.score for i in out] == [0.7, 0.3]
        assert [i.box for i in out] == [d.box for d in dets]
