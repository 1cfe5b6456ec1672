import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eood import (
    CalibrationProfile,
    LogitsVector,
    PipelineConfig,
    SampleRecord,
    ScoreOrientation,
    Split,
    decide,
    energy_score,
    eood_score,
    msp_score,
    read_score_file,
    threshold_at_tpr,
    write_score_file,
    write_dump,
)
from eood.errors import DomainError
from eood.pipeline import MissingDumpError
from eood.types import ScoreReport

finite_logits = st.lists(
    st.floats(min_value=-50, max_value=50, allow_nan=False), min_size=2, max_size=12
)


class TestMsp:
    def test_uniform_logits(self):
        assert msp_score(np.zeros(10)) == pytest.approx(0.1, abs=1e-12)

    def test_two_class_oracle(self):
        assert msp_score([10.0, 0.0]) == pytest.approx(0.9999546021312976, abs=1e-12)

    def test_three_class_oracle(self):
        assert msp_score([0.0, 0.0, math.log(3.0)]) == pytest.approx(0.6, abs=1e-12)

    def test_huge_logits_stable(self):
        assert msp_score([1000.0, 0.0]) == pytest.approx(1.0)

    @given(finite_logits, st.floats(min_value=-100, max_value=100, allow_nan=False))
    @settings(max_examples=50, deadline=None)
    def test_shift_invariance(self, logits, c):
        a = msp_score(logits)
        b = msp_score([v + c for v in logits])
        assert abs(a - b) <= 1e-12

    def test_rejects_non_finite(self):
        with pytest.raises(DomainError):
            msp_score([1.0, float("nan")])

    def test_rejects_single_class(self):
        with pytest.raises(DomainError):
            msp_score([1.0])

    def test_logits_vector_type(self):
        lv = LogitsVector(np.array([1.0, 2.0]))
        assert msp_score(lv) == msp_score([1.0, 2.0])
        with pytest.raises(DomainError):
            LogitsVector(np.array([1.0]))


class TestEnergy:
    def test_symmetric_pair(self):
        assert energy_score([0.0, 0.0]) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_single_logit_identity(self):
        assert energy_score([5.0]) == pytest.approx(5.0, abs=1e-12)

    def test_temperature_oracle(self):
        # 2 * ln(e^1.5 + e^0.5 + 1), frozen from a direct log-sum-exp oracle
        assert energy_score([3.0, 1.0, 0.0], temperature=2.0) == pytest.approx(
            3.92873756821589, abs=1e-12
        )

    @given(finite_logits, st.floats(min_value=-100, max_value=100, allow_nan=False))
    @settings(max_examples=50, deadline=None)
    def test_shift_identity(self, logits, c):
        a = energy_score(logits)
        b = energy_score([v + c for v in logits])
        assert abs((a + c) - b) <= 1e-12

    def test_rejects_bad_temperature(self):
        with pytest.raises(DomainError):
            energy_score([1.0, 2.0], temperature=0.0)

    def test_rejects_non_finite(self):
        with pytest.raises(DomainError):
            energy_score([float("inf"), 1.0])


def make_profile(selected_block=2, threshold=0.0,
                 orientation=ScoreOrientation.NEG_CONDITIONAL_ENTROPY, seed=1):
    return CalibrationProfile(
        selected_block=selected_block,
        threshold=threshold,
        cer_vector=((selected_block, 1.0),),
        config=PipelineConfig(rng_seed=seed),
        orientation=orientation,
    )


class TestDecide:
    def test_score_at_threshold_is_id(self):
        assert decide(0.0, make_profile(threshold=0.0)) == "ID"

    def test_just_below_is_ood(self):
        assert decide(-1e-12, make_profile(threshold=0.0)) == "OOD"

    def test_threshold_from_integer_scores(self):
        gamma = threshold_at_tpr(np.arange(1, 101, dtype=float), 0.95)
        assert gamma == 6.0
        profile = make_profile(threshold=gamma)
        kept = sum(decide(float(s), profile) == "ID" for s in range(1, 101))
        assert kept == 95


def write_record(root, sample_id, arrays, split=Split.TEST_ID):
    refs = []
    for block, arr in arrays.items():
        ref = f"{sample_id}_b{block}.eood"
        write_dump(arr.astype(np.float32), root / ref)
        refs.append((block, ref))
    return SampleRecord(sample_id, split, tuple(sorted(refs)))


class TestEoodScore:
    def test_identical_dumps_score_highest(self, tmp_path):
        # identical block tensors are the maximal-dependence limit: the
        # conditional entropy bottoms out, so the oriented score tops out
        rng = np.random.default_rng(0)
        data = rng.standard_normal((4, 8, 8))
        rec_same = write_record(tmp_path, "same", {1: data, 2: data})
        rec_noisy = write_record(
            tmp_path, "noisy", {1: data + 0.3 * rng.standard_normal((4, 8, 8)), 2: data}
        )
        profile = make_profile()
        score_same = eood_score(rec_same, profile, tmp_path)
        score_noisy = eood_score(rec_noisy, profile, tmp_path)
        assert math.isfinite(score_same)
        assert score_same > score_noisy

    def test_correlated_beats_independent(self, tmp_path):
        rng = np.random.default_rng(1)
        cur = rng.standard_normal((4, 8, 8))
        rec_a = write_record(
            tmp_path, "corr", {1: cur + 0.05 * rng.standard_normal((4, 8, 8)), 2: cur}
        )
        rec_b = write_record(
            tmp_path, "indep", {1: rng.standard_normal((4, 8, 8)), 2: rng.standard_normal((4, 8, 8))}
        )
        profile = make_profile()
        assert eood_score(rec_a, profile, tmp_path) > eood_score(rec_b, profile, tmp_path)

    def test_orientation_flip_negates(self, tmp_path):
        rng = np.random.default_rng(2)
        rec = write_record(
            tmp_path, "flip", {1: rng.standard_normal((4, 8, 8)), 2: rng.standard_normal((4, 8, 8))}
        )
        neg = eood_score(rec, make_profile(), tmp_path)
        pos = eood_score(
            rec, make_profile(orientation=ScoreOrientation.POS_CONDITIONAL_ENTROPY), tmp_path
        )
        assert neg == -pos

    def test_missing_previous_block(self, tmp_path):
        rng = np.random.default_rng(3)
        rec = write_record(tmp_path, "gap", {2: rng.standard_normal((4, 8, 8))})
        with pytest.raises(MissingDumpError):
            eood_score(rec, make_profile(), tmp_path)

    def test_bit_identical_determinism(self, tmp_path):
        rng = np.random.default_rng(4)
        rec = write_record(
            tmp_path, "det", {1: rng.standard_normal((4, 8, 8)), 2: rng.standard_normal((4, 8, 8))}
        )
        profile = make_profile(seed=77)
        a = eood_score(rec, profile, tmp_path)
        b = eood_score(rec, profile, tmp_path)
        assert a == b  # bit-identical


class TestScoreFiles:
    def test_round_trip_sorted(self, tmp_path):
        reports = [
            ScoreReport("z", 1.5, "ID", msp_score=0.9),
            ScoreReport("a", -2.0, "OOD", energy_score=1.25),
        ]
        path = tmp_path / "scores.jsonl"
        write_score_file(path, reports, "fingerprint123", 0.95)
        header, back = read_score_file(path)
        assert header["config_fingerprint"] == "fingerprint123"
        assert header["tpr_target"] == 0.95
        assert [r.sample_id for r in back] == ["a", "z"]
        assert {r.sample_id: r for r in back} == {r.sample_id: r for r in reports}
