import pytest
import torch

from camofuse.checkpoint import (check_model_section, load_checkpoint,
                                 restore_model, save_checkpoint)
from camofuse.config import (ModelConfig, RunConfig, apply_overrides,
                             load_config, parse_config, save_config,
                             serialize_config)
from camofuse.errors import ConfigError
from camofuse.model import build_model


def tiny_run_config(**model_kw):
    cfg = RunConfig()
    base = dict(input_size=32, stage_channels=(4, 8, 16, 32), vit_dim=8,
                vit_heads=2, decoder_width=8)
    base.update(model_kw)
    cfg.model = ModelConfig(**base)
    return cfg


class TestConfigFormat:
    def test_round_trip_is_byte_identical(self):
        cfg = RunConfig()
        text = serialize_config(cfg)
        assert serialize_config(parse_config(text)) == text

    def test_round_trip_with_overrides(self):
        cfg = apply_overrides(RunConfig(), {
            "seed": "3", "model.fusion_mode": "no_daw",
            "optim.lr": "0.001", "model.stage_channels": "4,8,16,32",
        })
        assert cfg.seed == 3
        assert cfg.model.fusion_mode == "no_daw"
        assert cfg.optim.lr == 0.001
        assert cfg.model.stage_channels == (4, 8, 16, 32)
        text = serialize_config(cfg)
        assert serialize_config(parse_config(text)) == text

    def test_defaults_match_published_schedule(self):
        cfg = RunConfig()
        assert cfg.model.input_size == 352
        assert cfg.optim.lr == 1e-5
        assert cfg.optim.batch_size == 4
        assert cfg.optim.epochs == 100
        assert cfg.optim.lr_decay_epochs == 50
        assert cfg.optim.lr_decay_factor == 0.1
        assert cfg.optim.lambda_weights == (1.0, 0.5, 0.25)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("model.bogus = 1\n")

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("optim.lr = fast\n")

    def test_bad_mode_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("model.fusion_mode = sometimes\n")

    def test_comments_and_blank_lines_ignored(self):
        cfg = parse_config("# comment\n\nseed = 9  # trailing\n")
        assert cfg.seed == 9

    def test_file_round_trip(self, tmp_path):
        cfg = tiny_run_config()
        path = tmp_path / "run.cfg"
        save_config(cfg, path)
        assert serialize_config(load_config(path)) == serialize_config(cfg)


class TestCheckpoint:
    def test_save_load_exact_tensors(self, tmp_path):
        torch.manual_seed(0)
        cfg = tiny_run_config()
        model = build_model(cfg.model)
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, model, cfg)
        state, loaded_cfg = load_checkpoint(path)
        assert serialize_config(loaded_cfg) == serialize_config(cfg)
        for name, tensor in model.state_dict().items():
            if name.endswith("num_batches_tracked"):
                continue
            assert torch.equal(state[name], tensor), name

    def test_restore_into_fresh_model(self, tmp_path):
        torch.manual_seed(1)
        cfg = tiny_run_config()
        model = build_model(cfg.model)
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, model, cfg)
        state, loaded_cfg = load_checkpoint(path)
        torch.manual_seed(2)
        fresh = build_model(loaded_cfg.model)
        restore_model(fresh, state)
        fresh.eval()
        model.eval()
        x = torch.randn(1, 3, 32, 32)
        d = torch.randn(1, 1, 32, 32)
        a, _ = model(x, d)
        b, _ = fresh(x, d)
        for t1, t2 in zip(a.as_tuple(), b.as_tuple()):
            assert torch.equal(t1, t2)

    def test_key_mismatch_is_named_error(self, tmp_path):
        torch.manual_seed(3)
        cfg = tiny_run_config()
        model = build_model(cfg.model)
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, model, cfg)
        state, _ = load_checkpoint(path)
        other = build_model(tiny_run_config(decoder_mode="baseline").model)
        with pytest.raises(ConfigError, match="key mismatch"):
            restore_model(other, state)

    def test_config_mismatch_names_first_key(self):
        a = tiny_run_config()
        b = tiny_run_config(fusion_mode="no_daw")
        with pytest.raises(ConfigError, match="model.fusion_mode"):
            check_model_section(a, b)

    def test_not_a_checkpoint_rejected(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"garbage")
        with pytest.raises(ConfigError):
            load_checkpoint(path)
