"""File formats: RTTM, feature matrices, toy weights, scenario JSON."""

import numpy as np
import pytest

from gladiar.backend import ToyWeights
from gladiar.fileio import (
    feature_read,
    feature_write,
    rttm_read,
    rttm_write,
    scenario_dumps,
    scenario_read,
    scenario_write,
    weights_read,
    weights_write,
)
from gladiar.scenario import GenConfig, generate_scenario
from gladiar.types import DataError, LinearHead, SegmentAnnotation


class TestRttm:
    def test_line_format(self, tmp_path):
        path = tmp_path / "a.rttm"
        rttm_write(SegmentAnnotation("rec", [("A", 0.1, 0.3)]), path)
        assert path.read_text() == "SPEAKER rec 1 0.10 0.20 <NA> <NA> A <NA> <NA>\n"

    def test_round_trip(self, tmp_path):
        path = tmp_path / "b.rttm"
        original = SegmentAnnotation(
            "meeting", [("A", 0.0, 1.5), ("B", 1.2, 2.0), ("A", 3.0, 3.1)]
        )
        rttm_write(original, path)
        assert rttm_read(path) == original

    def test_empty_annotation_empty_file(self, tmp_path):
        path = tmp_path / "c.rttm"
        rttm_write(SegmentAnnotation("rec", []), path)
        assert path.read_text() == ""
        assert rttm_read(path).segments == []

    def test_whitespace_tolerant(self, tmp_path):
        path = tmp_path / "d.rttm"
        path.write_text("  SPEAKER   rec  1   1.00    0.50 <NA> <NA>  B  <NA> <NA>  \n\n")
        assert rttm_read(path).segments == [("B", 1.0, 1.5)]

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "e.rttm"
        path.write_text("SPEAKER rec 1 0.00 1.00 <NA> <NA> A <NA> <NA>\nnot a line\n")
        with pytest.raises(DataError, match="line 2"):
            rttm_read(path)

    def test_mixed_recordings_rejected(self, tmp_path):
        path = tmp_path / "f.rttm"
        path.write_text(
            "SPEAKER one 1 0.00 1.00 <NA> <NA> A <NA> <NA>\n"
            "SPEAKER two 1 0.00 1.00 <NA> <NA> A <NA> <NA>\n"
        )
        with pytest.raises(DataError):
            rttm_read(path)


class TestFeatureFile:
    def test_round_trip_is_exact_at_float32(self, tmp_path):
        path = tmp_path / "x.feats"
        features = np.random.default_rng(0).standard_normal((5, 13)).astype(np.float32)
        feature_write(features, path)
        np.testing.assert_array_equal(feature_read(path), features.astype(np.float64))

    def test_rejects_zero_feature_dim(self, tmp_path):
        with pytest.raises(DataError):
            feature_write(np.zeros((0, 4)), tmp_path / "y.feats")

    def test_truncation_names_byte_counts(self, tmp_path):
        path = tmp_path / "z.feats"
        feature_write(np.ones((2, 3)), path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-4])
        with pytest.raises(DataError, match=r"expected 40 bytes, got 36"):
            feature_read(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "w.feats"
        path.write_bytes(b"NOPE" + bytes(12))
        with pytest.raises(DataError, match="magic"):
            feature_read(path)


class TestWeightsFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        original = ToyWeights(
            encoder_weight=rng.standard_normal((4, 3)).astype(np.float32),
            encoder_bias=rng.standard_normal(4).astype(np.float32),
            head=LinearHead(rng.standard_normal(4).astype(np.float32), 0.25),
            attn_out=rng.standard_normal((4, 4)).astype(np.float32),
            cap=3,
        )
        path = tmp_path / "m.weights"
        weights_write(original, path)
        loaded = weights_read(path)
        np.testing.assert_array_equal(loaded.encoder_weight, original.encoder_weight)
        np.testing.assert_array_equal(loaded.encoder_bias, original.encoder_bias)
        np.testing.assert_array_equal(loaded.head.weight, original.head.weight)
        assert loaded.head.bias == original.head.bias
        np.testing.assert_array_equal(loaded.attn_out, original.attn_out)
        assert loaded.cap == 3

    def test_truncation(self, tmp_path):
        path = tmp_path / "n.weights"
        weights_write(
            ToyWeights(np.ones((2, 2)), np.ones(2), LinearHead(np.ones(2)), np.eye(2), 1),
            path,
        )
        path.write_bytes(path.read_bytes()[:-1])
        with pytest.raises(DataError, match="expected"):
            weights_read(path)


class TestScenarioJson:
    def test_fixed_seed_identical_bytes(self):
        cfg = GenConfig(num_speakers=2, duration_s=20, overlap_ratio=0.2,
                        prototype_dim=8, seed=3)
        a = scenario_dumps(generate_scenario(cfg))
        b = scenario_dumps(generate_scenario(cfg))
        assert a == b

    def test_round_trip(self, tmp_path):
        cfg = GenConfig(num_speakers=3, duration_s=30, overlap_ratio=0.2,
                        prototype_dim=8, seed=4)
        scenario = generate_scenario(cfg)
        path = tmp_path / "s.json"
        scenario_write(scenario, path)
        loaded = scenario_read(path)
        assert loaded.duration == scenario.duration
        assert loaded.seed == scenario.seed
        for a, b in zip(loaded.speakers, scenario.speakers):
            assert a.label == b.label
            assert a.segments == b.segments
            np.testing.assert_array_equal(a.prototype, b.prototype)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(DataError):
            scenario_read(path)

    def test_missing_fields(self, tmp_path):
        path = tmp_path / "partial.json"
        path.write_text('{"duration_frames": 10}')
        with pytest.raises(DataError):
            scenario_read(path)
