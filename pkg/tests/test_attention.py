"""CBAM and criss-cross attention modules."""

import numpy as np
import pytest
import torch

from protoseg.errors import ShapeError
from protoseg.model import CBAM, CCAM, NetworkConfig, ProtoSegNet, build_attention
from protoseg.model.types import FeatureMap
from protoseg.model.attention import AttentionStack
from protoseg.seeding import seed_torch


def _zero(module):
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()


class TestCBAMChannelGate:
    def test_zero_everything_gives_half(self):
        cbam = CBAM(channels=4)
        _zero(cbam)
        x = torch.zeros((2, 4, 5, 5), dtype=torch.float64)
        gate = cbam.channel_gate(x)
        assert torch.allclose(gate, torch.full_like(gate, 0.5))

    def test_gate_strictly_inside_unit_interval(self):
        seed_torch(3)
        cbam = CBAM(channels=8)
        x = torch.randn((2, 8, 6, 6), dtype=torch.float64) * 5
        gate = cbam.channel_gate(x)
        assert (gate > 0).all() and (gate < 1).all()

    def test_hand_set_mlp(self):
        # 2 channels, reduction 4 -> hidden ceil(2/4)=1
        cbam = CBAM(channels=2, reduction=4)
        _zero(cbam)
        with torch.no_grad():
            cbam.mlp[0].weight.copy_(torch.tensor([[1.0, 0.0]], dtype=torch.float64))
            cbam.mlp[2].weight.copy_(torch.tensor([[2.0], [0.0]], dtype=torch.float64))
        x = torch.zeros((1, 2, 2, 2), dtype=torch.float64)
        x[0, 0] = torch.tensor([[1.0, 2.0], [3.0, 6.0]], dtype=torch.float64)
        # avg over channel 0 = 3.0, max = 6.0; hidden relu(3)=3 and relu(6)=6
        # gate channel 0 = sigmoid(2*3 + 2*6) = sigmoid(18); channel 1 = 0.5
        gate = cbam.channel_gate(x)
        expected = torch.sigmoid(torch.tensor([18.0, 0.0], dtype=torch.float64))
        assert torch.allclose(gate[0], expected)

    def test_hidden_width_is_ceil(self):
        assert CBAM(channels=6, reduction=4).mlp[0].out_features == 2
        assert CBAM(channels=4, reduction=4).mlp[0].out_features == 1

    def test_channel_mismatch_rejected(self):
        cbam = CBAM(channels=4)
        with pytest.raises(ShapeError):
            cbam.channel_gate(torch.zeros((1, 5, 3, 3), dtype=torch.float64))


class TestCBAMSpatialGate:
    def test_zero_conv_uniform_half(self):
        cbam = CBAM(channels=3)
        _zero(cbam)
        x = torch.randn((1, 3, 9, 9), dtype=torch.float64)
        gate = cbam.spatial_gate(x)
        assert torch.allclose(gate, torch.full_like(gate, 0.5))

    def test_spatial_shape_preserved(self):
        seed_torch(0)
        cbam = CBAM(channels=3)
        for h, w in ((7, 7), (9, 13), (24, 8)):
            gate = cbam.spatial_gate(torch.randn((1, 3, h, w), dtype=torch.float64))
            assert gate.shape == (1, 1, h, w)

    def test_single_pixel_kernel_case(self):
        cbam = CBAM(channels=2)
        _zero(cbam)
        with torch.no_grad():
            cbam.spatial_conv.weight[0, 0, 3, 3] = 1.0  # center tap on mean map
        x = torch.zeros((1, 2, 7, 7), dtype=torch.float64)
        x[0, :, 2, 2] = 4.0  # channel mean at (2,2) is 4
        gate = cbam.spatial_gate(x)
        assert torch.isclose(gate[0, 0, 2, 2], torch.sigmoid(torch.tensor(4.0)).double())
        assert torch.isclose(gate[0, 0, 0, 0], torch.tensor(0.5, dtype=torch.float64))

    def test_forward_never_zeroes_completely(self):
        seed_torch(1)
        cbam = CBAM(channels=4)
        x = torch.randn((1, 4, 8, 8), dtype=torch.float64)
        out = cbam(x)
        assert out.shape == x.shape
        mask = x != 0
        assert (out[mask].abs() < x[mask].abs()).all()  # gates only attenuate


class TestCCAM:
    def test_1x1_input_degenerates_to_value_plus_input(self):
        seed_torch(2)
        ccam = CCAM(channels=4, recurrence=1)
        x = torch.randn((1, 4, 1, 1), dtype=torch.float64)
        out = ccam(x)
        expected = ccam.value(x) + x
        assert torch.allclose(out, expected)

    def test_recurrence_shares_weights(self):
        seed_torch(2)
        one = CCAM(channels=4, recurrence=1)
        two = CCAM(channels=4, recurrence=2)
        with torch.no_grad():
            for p1, p2 in zip(one.parameters(), two.parameters()):
                p2.copy_(p1)
        x = torch.randn((1, 4, 3, 3), dtype=torch.float64)
        assert torch.allclose(two(x), one(one(x)))

    def test_matches_bruteforce_criss_cross(self):
        seed_torch(5)
        ccam = CCAM(channels=3, recurrence=1)
        x = torch.randn((1, 3, 2, 2), dtype=torch.float64)
        out = ccam(x)

        with torch.no_grad():
            q = ccam.query(x)[0].numpy()
            k = ccam.key(x)[0].numpy()
            v = ccam.value(x)[0].numpy()
        xin = x[0].numpy()
        h, w = 2, 2
        expected = np.zeros_like(xin)
        for i in range(h):
            for j in range(w):
                support = [(r, j) for r in range(h) if r != i] + [(i, c) for c in range(w)]
                energies = np.array(
                    [np.dot(q[:, i, j], k[:, r, c]) for (r, c) in support]
                )
                weights = np.exp(energies - energies.max())
                weights /= weights.sum()
                mix = sum(
                    wgt * v[:, r, c] for wgt, (r, c) in zip(weights, support)
                )
                expected[:, i, j] = mix + xin[:, i, j]
        assert np.allclose(out[0].detach().numpy(), expected, atol=1e-9)

    def test_invalid_recurrence_rejected(self):
        with pytest.raises(ValueError):
            CCAM(channels=4, recurrence=0)


class TestAttentionStack:
    def _pyramid(self):
        seed_torch(7)
        return [
            FeatureMap(torch.randn((1, c, s, s), dtype=torch.float64), stride)
            for c, s, stride in ((8, 8, 4), (16, 4, 8))
        ]

    def test_kind_none_is_identity(self):
        stack = AttentionStack("none", (8, 16))
        pyramid = self._pyramid()
        out = stack(pyramid)
        assert all(o.data is p.data for o, p in zip(out, pyramid))

    def test_full_placement_applies_per_level_twice(self):
        net = ProtoSegNet(
            NetworkConfig(attention_kind="cbam", attention_placement="full")
        )
        n_modules = sum(1 for m in net.modules() if isinstance(m, CBAM))
        assert n_modules == 4 + 6  # backbone levels + pyramid levels

    def test_backbone_only_placement(self):
        net = ProtoSegNet(
            NetworkConfig(attention_kind="ccam", attention_placement="backbone_only")
        )
        n_modules = sum(1 for m in net.modules() if isinstance(m, CCAM))
        assert n_modules == 4

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            build_attention("squeeze", 8)

    def test_level_count_mismatch_rejected(self):
        stack = AttentionStack("cbam", (8, 16))
        with pytest.raises(ShapeError):
            stack(self._pyramid()[:1])
