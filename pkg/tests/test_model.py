import itertools

import pytest
import torch

from camofuse.config import ModelConfig
from camofuse.losses import total_loss
from camofuse.model import build_model


def cfg(**kw):
    base = dict(input_size=32, stage_channels=(8, 16, 32, 64), vit_dim=16,
                vit_heads=2, decoder_width=8)
    base.update(kw)
    return ModelConfig(**base)


def run(model, size=32, batch=1, seed=0):
    g = torch.Generator().manual_seed(seed)
    rgb = torch.randn(batch, 3, size, size, generator=g)
    depth = torch.randn(batch, 1, size, size, generator=g)
    return model(rgb, depth)


class TestForward:
    def test_output_shapes_at_input_resolution(self):
        torch.manual_seed(0)
        model = build_model(cfg())
        bundle, _ = run(model)
        for out in bundle.as_tuple():
            assert out.shape == (1, 1, 32, 32)

    def test_shape_sweep_width_by_size(self):
        for width, size in itertools.product((8, 16), (32, 64)):
            torch.manual_seed(1)
            model = build_model(cfg(input_size=size, decoder_width=width))
            bundle, _ = run(model, size=size)
            for out in bundle.as_tuple():
                assert out.shape == (1, 1, size, size)
                assert torch.isfinite(out).all()

    def test_deterministic_given_seed(self):
        x = torch.randn(1, 3, 32, 32)
        d = torch.randn(1, 1, 32, 32)
        torch.manual_seed(7)
        m1 = build_model(cfg())
        m1.eval()
        torch.manual_seed(7)
        m2 = build_model(cfg())
        m2.eval()
        a, _ = m1(x, d)
        b, _ = m2(x, d)
        for t1, t2 in zip(a.as_tuple(), b.as_tuple()):
            assert torch.equal(t1, t2)


class TestModeMatrix:
    @pytest.mark.parametrize("fusion_mode", ["full", "no_daw", "no_ca_sa",
                                             "baseline", "first_layer",
                                             "second_layer", "third_layer"])
    def test_fusion_modes_train_step(self, fusion_mode):
        torch.manual_seed(2)
        model = build_model(cfg(fusion_mode=fusion_mode))
        bundle, _ = run(model)
        loss, _ = total_loss(bundle, (torch.rand(1, 32, 32) > 0.5).float())
        loss.backward()
        assert torch.isfinite(loss)

    @pytest.mark.parametrize("encoder_mode", ["full", "no_depth", "no_residual",
                                              "no_vit"])
    def test_encoder_modes_train_step(self, encoder_mode):
        torch.manual_seed(3)
        model = build_model(cfg(encoder_mode=encoder_mode))
        bundle, _ = run(model)
        loss, _ = total_loss(bundle, (torch.rand(1, 32, 32) > 0.5).float())
        loss.backward()
        assert torch.isfinite(loss)

    @pytest.mark.parametrize("decoder_mode", ["full", "no_geca", "no_fam",
                                              "no_residual", "baseline"])
    def test_decoder_modes_train_step(self, decoder_mode):
        torch.manual_seed(4)
        model = build_model(cfg(decoder_mode=decoder_mode))
        bundle, _ = run(model)
        loss, _ = total_loss(bundle, (torch.rand(1, 32, 32) > 0.5).float())
        loss.backward()
        assert torch.isfinite(loss)

    def test_no_rmfe_variant(self):
        torch.manual_seed(5)
        model = build_model(cfg(use_rmfe=False))
        bundle, _ = run(model)
        assert all(torch.isfinite(o).all() for o in bundle.as_tuple())

    def test_no_depth_model_ignores_depth(self):
        torch.manual_seed(6)
        model = build_model(cfg(encoder_mode="no_depth"))
        model.eval()
        rgb = torch.randn(1, 3, 32, 32)
        a, _ = model(rgb, torch.randn(1, 1, 32, 32))
        b, _ = model(rgb, torch.randn(1, 1, 32, 32) * 3)
        for t1, t2 in zip(a.as_tuple(), b.as_tuple()):
            assert torch.equal(t1, t2)
