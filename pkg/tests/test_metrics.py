import math
import os

import numpy as np
import pytest
from PIL import Image

from camofuse.errors import DataError
from camofuse.metrics import (e_measure, evaluate_directory, format_report_table,
                              mae, s_measure, weighted_f_beta, write_report_csv)

from oracles import (corpus, oracle_e_measure, oracle_mae, oracle_s_measure,
                     oracle_weighted_f)


class TestMae:
    def test_perfect(self):
        g = (np.random.default_rng(0).random((8, 8)) > 0.5).astype(float)
        assert mae(g, g) == 0.0

    def test_constant_half_is_exactly_half(self):
        g = (np.random.default_rng(1).random((8, 8)) > 0.5).astype(float)
        assert mae(np.full((8, 8), 0.5), g) == 0.5

    def test_matches_double_loop(self):
        rng = np.random.default_rng(2)
        p = rng.random((8, 8))
        g = (rng.random((8, 8)) > 0.5).astype(float)
        assert mae(p, g) == pytest.approx(oracle_mae(p, g), abs=1e-12)

    def test_complement_symmetry(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            p = rng.random((6, 6))
            g = (rng.random((6, 6)) > 0.5).astype(float)
            assert mae(p, g) == pytest.approx(mae(1.0 - p, 1.0 - g), abs=1e-12)

    def test_invariant_under_joint_spatial_permutation(self):
        # holds for MAE only; the structure-aware measures depend on layout
        rng = np.random.default_rng(8)
        p = rng.random((6, 6))
        g = (rng.random((6, 6)) > 0.5).astype(float)
        perm = rng.permutation(36)
        assert mae(p.ravel()[perm].reshape(6, 6),
                   g.ravel()[perm].reshape(6, 6)) == pytest.approx(mae(p, g),
                                                                   abs=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            mae(np.zeros((4, 4)), np.zeros((5, 5)))


class TestSMeasure:
    def test_perfect_binary(self):
        g = np.zeros((16, 16))
        g[4:11, 5:12] = 1.0
        assert s_measure(g, g) == pytest.approx(1.0, abs=1e-12)

    def test_inverted_matches_oracle(self):
        g = np.zeros((16, 16))
        g[3:9, 2:13] = 1.0
        p = 1.0 - g
        assert s_measure(p, g) == pytest.approx(oracle_s_measure(p, g), abs=1e-9)

    def test_empty_gt_empty_pred_is_one(self):
        z = np.zeros((8, 8))
        assert s_measure(z, z) == 1.0

    def test_full_gt_branch(self):
        g = np.ones((8, 8))
        p = np.full((8, 8), 0.75)
        assert s_measure(p, g) == pytest.approx(0.75, abs=1e-12)


class TestEMeasure:
    def test_perfect_is_exactly_one(self):
        g = np.zeros((8, 8))
        g[2:5, 3:7] = 1.0
        assert e_measure(g, g) == 1.0

    def test_zero_pred_matches_sweep_oracle(self):
        g = np.zeros((8, 8))
        g[1:4, 1:4] = 1.0
        p = np.zeros((8, 8))
        assert e_measure(p, g) == pytest.approx(oracle_e_measure(p, g), abs=1e-9)

    def test_random_matches_oracle(self):
        rng = np.random.default_rng(4)
        p = rng.random((8, 8))
        g = (rng.random((8, 8)) > 0.5).astype(float)
        assert e_measure(p, g) == pytest.approx(oracle_e_measure(p, g), abs=1e-6)

    def test_adaptive_variant_perfect(self):
        g = np.zeros((8, 8))
        g[2:6, 2:6] = 1.0
        assert e_measure(g, g, variant="adaptive") == 1.0

    def test_unknown_variant_rejected(self):
        with pytest.raises(ValueError):
            e_measure(np.zeros((4, 4)), np.zeros((4, 4)), variant="max")


class TestWeightedF:
    def test_perfect_is_exactly_one(self):
        g = np.zeros((16, 16))
        g[4:10, 4:10] = 1.0
        assert weighted_f_beta(g, g) == 1.0

    def test_constant_half_matches_oracle(self):
        g = np.zeros((16, 16))
        g[2:9, 5:14] = 1.0
        p = np.full((16, 16), 0.5)
        assert weighted_f_beta(p, g) == pytest.approx(oracle_weighted_f(p, g), abs=1e-6)

    def test_empty_gt_defined_zero(self):
        assert weighted_f_beta(np.random.default_rng(5).random((8, 8)),
                               np.zeros((8, 8))) == 0.0


class TestOracleEquivalenceCorpus:
    @pytest.mark.parametrize("name,pred,gt", corpus())
    def test_all_four_measures(self, name, pred, gt):
        assert mae(pred, gt) == pytest.approx(oracle_mae(pred, gt), abs=1e-6)
        assert s_measure(pred, gt) == pytest.approx(oracle_s_measure(pred, gt), abs=1e-6)
        assert e_measure(pred, gt) == pytest.approx(oracle_e_measure(pred, gt), abs=1e-6)
        assert weighted_f_beta(pred, gt) == pytest.approx(
            oracle_weighted_f(pred, gt), abs=1e-6)


class TestRangeInvariants:
    def test_scores_within_unit_interval(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            p = rng.random((8, 8))
            g = (rng.random((8, 8)) > rng.uniform(0.2, 0.8)).astype(float)
            assert 0.0 <= s_measure(p, g) <= 1.0
            assert 0.0 <= e_measure(p, g, n_thresholds=16) <= 1.0
            assert 0.0 <= weighted_f_beta(p, g) <= 1.0
            assert 0.0 <= mae(p, g) <= 1.0


def _write_gray(path, arr):
    Image.fromarray(np.round(arr * 255).astype(np.uint8)).save(path)


class TestEvaluateDirectory:
    def _populate(self, tmp_path, pairs):
        pred_dir = tmp_path / "pred"
        gt_dir = tmp_path / "gt"
        pred_dir.mkdir()
        gt_dir.mkdir()
        for stem, (p, g) in pairs.items():
            _write_gray(pred_dir / f"{stem}.png", p)
            _write_gray(gt_dir / f"{stem}.png", g)
        return str(pred_dir), str(gt_dir)

    def test_gt_as_predictions_is_perfect(self, tmp_path):
        g = np.zeros((8, 8))
        g[2:6, 2:6] = 1.0
        pred_dir, gt_dir = self._populate(tmp_path, {"a": (g, g), "b": (1 - g, 1 - g)})
        report = evaluate_directory(pred_dir, gt_dir)
        assert report.count == 2
        assert report.s_alpha == pytest.approx(1.0)
        assert report.e_phi == pytest.approx(1.0)
        assert report.f_w_beta == pytest.approx(1.0)
        assert report.mae == pytest.approx(0.0)

    def test_two_sample_average_matches_oracle(self, tmp_path):
        rng = np.random.default_rng(7)
        g1 = np.zeros((8, 8)); g1[1:5, 2:7] = 1.0
        g2 = np.zeros((8, 8)); g2[3:7, 0:4] = 1.0
        p1 = np.round(rng.random((8, 8)) * 255) / 255.0
        p2 = np.round(rng.random((8, 8)) * 255) / 255.0
        pred_dir, gt_dir = self._populate(tmp_path, {"a": (p1, g1), "b": (p2, g2)})
        report = evaluate_directory(pred_dir, gt_dir)
        want_mae = (oracle_mae(p1, g1) + oracle_mae(p2, g2)) / 2
        want_s = (oracle_s_measure(p1, g1) + oracle_s_measure(p2, g2)) / 2
        assert report.mae == pytest.approx(want_mae, abs=1e-6)
        assert report.s_alpha == pytest.approx(want_s, abs=1e-6)

    def test_orphan_prediction_is_named_error(self, tmp_path):
        g = np.zeros((8, 8)); g[2:4, 2:4] = 1.0
        pred_dir, gt_dir = self._populate(tmp_path, {"a": (g, g)})
        _write_gray(os.path.join(pred_dir, "stray.png"), g)
        with pytest.raises(DataError, match="stray"):
            evaluate_directory(pred_dir, gt_dir)

    def test_size_mismatch_is_error_not_resize(self, tmp_path):
        g = np.zeros((8, 8)); g[2:4, 2:4] = 1.0
        pred_dir, gt_dir = self._populate(tmp_path, {"a": (g, g)})
        _write_gray(os.path.join(pred_dir, "a.png"), np.zeros((12, 12)))
        with pytest.raises(DataError, match="size mismatch"):
            evaluate_directory(pred_dir, gt_dir)

    def test_reference_row_rendering(self):
        from camofuse.metrics import MetricReport
        row = MetricReport(dataset="CAMO", count=250, s_alpha=0.860,
                           e_phi=0.913, f_w_beta=0.799, mae=0.051)
        table = format_report_table([row])
        line = table.splitlines()[1]
        assert line.split() == ["CAMO", "250", "0.8600", "0.9130",
                                "0.7990", "0.0510"]

    def test_csv_and_table_formats(self, tmp_path):
        g = np.zeros((8, 8)); g[2:6, 1:5] = 1.0
        pred_dir, gt_dir = self._populate(tmp_path, {"a": (g, g)})
        report = evaluate_directory(pred_dir, gt_dir, dataset="demo")
        csv_path = tmp_path / "report.csv"
        write_report_csv([report], csv_path)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "dataset,n,s_alpha,e_phi,f_w_beta,mae"
        assert lines[1].startswith("demo,1,")
        table = format_report_table([report])
        assert "S_alpha" in table and "E_phi" in table \
            and "F_w_beta" in table and "MAE" in table
