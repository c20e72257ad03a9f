import math

import pytest
import torch

from camofuse.config import ModelConfig
from camofuse.encoder import TridentEncoder
from camofuse.errors import ConfigError
from camofuse.vit import FusionBranchConfig, SelfAttentionStage, TokenAttention


def small_cfg(**kw):
    base = dict(input_size=64, stage_channels=(8, 16, 32, 64), vit_dim=16,
                vit_heads=2, decoder_width=8)
    base.update(kw)
    return ModelConfig(**base)


def build(seed=0, **kw):
    torch.manual_seed(seed)
    enc = TridentEncoder(small_cfg(**kw))
    enc.eval()
    return enc


class TestEncodeShapes:
    def test_stage_and_fusion_shapes(self):
        enc = build()
        out = enc(torch.randn(1, 3, 64, 64), torch.randn(1, 1, 64, 64))
        assert [tuple(f.shape) for f in out.rgb_stages] == [
            (1, 8, 32, 32), (1, 16, 16, 16), (1, 32, 8, 8), (1, 64, 4, 4)]
        assert [tuple(f.shape) for f in out.depth_stages] == [
            (1, 8, 32, 32), (1, 16, 16, 16), (1, 32, 8, 8), (1, 64, 4, 4)]
        assert [tuple(f.shape) for f in out.fused] == [
            (1, 16, 16, 16), (1, 32, 8, 8), (1, 64, 4, 4)]
        assert len(out.q_values) == 4
        assert all(torch.isfinite(f).all() for f in out.fused)

    def test_wrong_input_size_rejected(self):
        enc = build()
        with pytest.raises(ConfigError):
            enc(torch.randn(1, 3, 32, 32), torch.randn(1, 1, 32, 32))

    def test_same_seed_bit_identical(self):
        x = torch.randn(1, 3, 64, 64)
        d = torch.randn(1, 1, 64, 64)
        out_a = build(seed=11)(x, d)
        out_b = build(seed=11)(x, d)
        for a, b in zip(out_a.fused, out_b.fused):
            assert torch.equal(a, b)
        for a, b in zip(out_a.q_values, out_b.q_values):
            assert torch.equal(a, b)


class TestAblationModes:
    def test_no_depth_ignores_depth_input(self):
        enc = build(encoder_mode="no_depth")
        rgb = torch.randn(1, 3, 64, 64)
        out_a = enc(rgb, torch.randn(1, 1, 64, 64))
        out_b = enc(rgb, torch.rand(1, 1, 64, 64) * 9)
        for a, b in zip(out_a.fused, out_b.fused):
            assert torch.equal(a, b)
        assert out_a.depth_stages == [] and out_a.q_values == []
        # the decoder consumes the RGB pyramid directly in this mode
        for f, x_c in zip(out_a.fused, out_a.rgb_stages[1:]):
            assert torch.equal(f, x_c)

    def test_zeroed_baseline_fusion_leaves_depth_branch_standalone(self):
        enc = build(fusion_mode="baseline")
        with torch.no_grad():
            for blk in enc.fusion_blocks:
                blk.baseline_conv.weight.zero_()
                blk.baseline_conv.bias.zero_()
        depth = torch.randn(1, 1, 64, 64)
        out = enc(torch.randn(1, 3, 64, 64), depth)
        standalone = enc.depth_backbone(depth)
        for got, want in zip(out.depth_stages, standalone):
            assert torch.equal(got, want)

    def test_first_layer_mode_shares_stage_one_gate(self):
        enc = build(fusion_mode="first_layer")
        out = enc(torch.randn(1, 3, 64, 64), torch.randn(1, 1, 64, 64))
        q = out.q_values
        assert torch.equal(q[0], q[1]) and torch.equal(q[1], q[2]) \
            and torch.equal(q[2], q[3])
        assert 0.0 < q[0].item() < 1.0

    def test_second_layer_mode_skips_first_stage_weighting(self):
        enc = build(fusion_mode="second_layer")
        out = enc(torch.randn(1, 3, 64, 64), torch.randn(1, 1, 64, 64))
        q = out.q_values
        assert torch.all(q[0] == 1.0)
        assert torch.equal(q[1], q[2]) and torch.equal(q[2], q[3])

    def test_third_layer_mode(self):
        enc = build(fusion_mode="third_layer")
        out = enc(torch.randn(1, 3, 64, 64), torch.randn(1, 1, 64, 64))
        q = out.q_values
        assert torch.all(q[0] == 1.0) and torch.all(q[1] == 1.0)
        assert torch.equal(q[2], q[3])

    def test_no_residual_mode_drops_cross_stage_link(self):
        enc = build(encoder_mode="no_residual")
        assert not enc.use_residual
        out = enc(torch.randn(1, 3, 64, 64), torch.randn(1, 1, 64, 64))
        assert [tuple(f.shape) for f in out.fused] == [
            (1, 16, 16, 16), (1, 32, 8, 8), (1, 64, 4, 4)]


class TestGradientFlow:
    def test_all_three_branches_receive_gradients(self):
        torch.manual_seed(5)
        enc = TridentEncoder(small_cfg())
        enc.train()
        out = enc(torch.randn(2, 3, 64, 64), torch.randn(2, 1, 64, 64))
        loss = sum(f.pow(2).mean() for f in out.fused) + sum(q.sum() for q in out.q_values)
        loss.backward()

        def branch_has_grad(module):
            return any(p.grad is not None and p.grad.abs().sum() > 0
                       for p in module.parameters())

        assert branch_has_grad(enc.rgb_backbone)
        assert branch_has_grad(enc.depth_backbone)
        assert branch_has_grad(enc.fusion_stages)
        assert branch_has_grad(enc.fusion_blocks)


class TestFusionBranchStage:
    def test_absent_prev_equals_zero_prev(self):
        torch.manual_seed(6)
        stage = SelfAttentionStage(8, FusionBranchConfig(patch_size=2, embed_dim=16,
                                                         depth=1, heads=2))
        x = torch.randn(1, 8, 8, 8)
        assert torch.equal(stage(x, None), stage(x, torch.zeros_like(x)))

    def test_token_count(self):
        stage = SelfAttentionStage(4, FusionBranchConfig(patch_size=2, embed_dim=8,
                                                         depth=1, heads=2))
        tokens = stage.embed(torch.randn(1, 4, 8, 6)).flatten(2).transpose(1, 2)
        assert tokens.shape[1] == (8 // 2) * (6 // 2)

    def test_indivisible_patch_grid_rejected(self):
        stage = SelfAttentionStage(4, FusionBranchConfig(patch_size=2, embed_dim=8,
                                                         depth=1, heads=2))
        with pytest.raises(ConfigError):
            stage(torch.randn(1, 4, 5, 5))

    def test_hand_computed_two_token_attention(self):
        attn = TokenAttention(2, heads=1)
        with torch.no_grad():
            attn.q.weight.copy_(torch.tensor([[1.0, 0.0], [0.0, 1.0]]))
            attn.q.bias.zero_()
            attn.k.weight.copy_(torch.tensor([[1.0, 0.0], [0.0, 1.0]]))
            attn.k.bias.zero_()
            attn.v.weight.copy_(torch.eye(2))
            attn.v.bias.zero_()
            attn.proj.weight.copy_(torch.eye(2))
            attn.proj.bias.zero_()
        x = torch.tensor([[[1.0, 0.0], [0.0, 2.0]]])  # two tokens
        scale = 1.0 / math.sqrt(2.0)
        # scores s_ij = (x_i . x_j) * scale
        s = [[1.0 * scale, 0.0], [0.0, 4.0 * scale]]
        out_rows = []
        for i in range(2):
            e = [math.exp(s[i][0]), math.exp(s[i][1])]
            z = e[0] + e[1]
            w = [e[0] / z, e[1] / z]
            out_rows.append([w[0] * 1.0 + w[1] * 0.0, w[0] * 0.0 + w[1] * 2.0])
        want = torch.tensor([out_rows])
        assert torch.allclose(attn(x), want, atol=1e-6)

    def test_bad_head_split_rejected(self):
        with pytest.raises(ConfigError):
            FusionBranchConfig(patch_size=2, embed_dim=10, depth=1, heads=4)
