import json

import numpy as np
import pytest

from eood import (
    CalibrationProfile,
    FeatureMap,
    PipelineConfig,
    SampleRecord,
    ScoreOrientation,
    ScoreReport,
    Split,
    seeded_rng,
)
from eood.errors import DomainError, ValidationError


class TestSeededRng:
    def test_same_seed_and_label_identical(self):
        a = seeded_rng(42, "jitter").uniform(size=100)
        b = seeded_rng(42, "jitter").uniform(size=100)
        assert np.array_equal(a, b)

    def test_distinct_labels_differ(self):
        a = seeded_rng(42, "jitter").uniform(size=100)
        b = seeded_rng(42, "jigsaw").uniform(size=100)
        assert not np.array_equal(a, b)

    def test_distinct_seeds_differ(self):
        a = seeded_rng(1, "x").uniform(size=100)
        b = seeded_rng(2, "x").uniform(size=100)
        assert not np.array_equal(a, b)

    def test_accepts_full_uint64_range(self):
        seeded_rng((1 << 64) - 1, "edge").uniform()


class TestFeatureMap:
    def test_shape_properties(self):
        fm = FeatureMap(1, np.zeros((3, 4, 5)))
        assert (fm.channels, fm.height, fm.width) == (3, 4, 5)

    def test_rejects_nan(self):
        data = np.zeros((1, 2, 2))
        data[0, 0, 0] = np.nan
        with pytest.raises(DomainError):
            FeatureMap(1, data)

    def test_rejects_inf(self):
        data = np.zeros((1, 2, 2))
        data[0, 1, 1] = np.inf
        with pytest.raises(DomainError):
            FeatureMap(1, data)

    def test_rejects_wrong_rank(self):
        with pytest.raises(ValidationError):
            FeatureMap(1, np.zeros((2, 2)))

    def test_immutable(self):
        fm = FeatureMap(1, np.zeros((1, 2, 2)))
        with pytest.raises(ValueError):
            fm.data[0, 0, 0] = 1.0


class TestSampleRecord:
    def test_round_trip(self):
        rec = SampleRecord("s1", Split.TEST_ID, ((1, "a.eood"), (2, "b.eood")), logits_ref="l.eood")
        assert SampleRecord.from_obj(rec.to_obj()) == rec

    def test_round_trip_without_logits(self):
        rec = SampleRecord("s1", Split.ID_CALIB, ((0, "img.eood"),))
        assert SampleRecord.from_obj(rec.to_obj()) == rec

    def test_rejects_unsorted_blocks(self):
        with pytest.raises(ValidationError):
            SampleRecord("s1", Split.TEST_ID, ((2, "b"), (1, "a")))

    def test_rejects_duplicate_blocks(self):
        with pytest.raises(ValidationError):
            SampleRecord("s1", Split.TEST_ID, ((1, "a"), (1, "b")))

    def test_feature_blocks_excludes_image_slot(self):
        rec = SampleRecord("s1", Split.ID_CALIB, ((0, "img"), (1, "a"), (2, "b")))
        assert rec.feature_blocks() == (1, 2)


class TestPipelineConfig:
    def test_defaults(self):
        cfg = PipelineConfig()
        assert cfg.k_neighbors == 3
        assert cfg.jitter_scale == 1e-10
        assert cfg.channel_cap == 32
        assert cfg.pool_policy == "coarser_grid"
        assert cfg.grid == 3
        assert cfg.tpr_target == 0.95
        assert cfg.score_orientation is ScoreOrientation.NEG_CONDITIONAL_ENTROPY
        assert cfg.calib_sample_cap == 1000

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"k_neighbors": 0},
            {"jitter_scale": 0.0},
            {"jitter_scale": -1e-3},
            {"channel_cap": 0},
            {"grid": 0},
            {"tpr_target": 0.0},
            {"tpr_target": 1.0},
            {"pool_policy": "crop"},
            {"calib_sample_cap": 0},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValidationError):
            PipelineConfig(**kwargs)

    def test_json_round_trip(self):
        cfg = PipelineConfig(rng_seed=7, grid=4, tpr_target=0.9)
        assert PipelineConfig.from_obj(json.loads(json.dumps(cfg.to_obj()))) == cfg

    def test_rejects_unknown_fields(self):
        with pytest.raises(ValidationError):
            PipelineConfig.from_obj({"k_neighbors": 3, "bogus": 1})

    def test_fingerprint_tracks_content(self):
        a, b = PipelineConfig(rng_seed=1), PipelineConfig(rng_seed=2)
        assert a.fingerprint() == PipelineConfig(rng_seed=1).fingerprint()
        assert a.fingerprint() != b.fingerprint()


class TestCalibrationProfile:
    def _profile(self, **over):
        base = dict(
            selected_block=3,
            threshold=-1.25,
            cer_vector=((2, 0.4), (3, 0.9)),
            config=PipelineConfig(rng_seed=5),
            degenerate_blocks=(),
            orientation=ScoreOrientation.NEG_CONDITIONAL_ENTROPY,
        )
        base.update(over)
        return CalibrationProfile(**base)

    def test_json_round_trip(self):
        prof = self._profile()
        assert CalibrationProfile.from_json(prof.to_json()) == prof

    def test_selected_block_must_be_maximal(self):
        with pytest.raises(ValidationError):
            self._profile(selected_block=2)

    def test_selected_block_must_exist(self):
        with pytest.raises(ValidationError):
            self._profile(selected_block=9)

    def test_cer_range_enforced(self):
        with pytest.raises(ValidationError):
            self._profile(cer_vector=((2, 0.4), (3, 1.5)), selected_block=3)

    def test_fingerprint_mismatch_rejected(self):
        obj = self._profile().to_obj()
        obj["config"]["rng_seed"] = 999
        with pytest.raises(ValidationError):
            CalibrationProfile.from_obj(obj)


class TestScoreReport:
    def test_round_trip(self):
        rep = ScoreReport("s1", -0.125, "ID", msp_score=0.7, energy_score=3.5)
        assert ScoreReport.from_obj(json.loads(rep.to_json_line())) == rep

    def test_round_trip_minimal(self):
        rep = ScoreReport("s1", 2.0, "OOD")
        assert ScoreReport.from_obj(json.loads(rep.to_json_line())) == rep

    def test_rejects_bad_decision(self):
        with pytest.raises(ValidationError):
            ScoreReport("s1", 0.0, "MAYBE")

    def test_full_precision_floats(self):
        score = -0.1234567890123456789
        rep = ScoreReport("s1", score, "ID")
        back = ScoreReport.from_obj(json.loads(rep.to_json_line()))
        assert back.eood_score == rep.eood_score
