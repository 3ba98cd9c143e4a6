"""DER scoring, counting confusion, frame-wise breakdown, RTF."""

import numpy as np
import pytest

from gladiar.scoring import (
    CountConfusion,
    count_confusion,
    der,
    framewise_breakdown,
    rtf_benchmark,
)
from gladiar.types import SegmentAnnotation


def ann(segments, recording_id="rec"):
    return SegmentAnnotation(recording_id, segments)


def random_annotation(rng, labels, duration=20.0, segments=6):
    out = []
    for _ in range(segments):
        onset = float(rng.uniform(0, duration - 1))
        length = float(rng.uniform(0.1, 3.0))
        out.append((str(rng.choice(labels)), onset, onset + length))
    return ann(out)


class TestDer:
    def test_perfect_hypothesis(self):
        reference = ann([("A", 0.0, 5.0), ("B", 2.0, 6.0)])
        for collar in (0.0, 0.25):
            report = der(reference, reference, collar=collar)
            assert report.der == 0.0

    def test_empty_hypothesis_is_all_miss(self):
        reference = ann([("A", 0.0, 10.0)])
        report = der(reference, ann([]), collar=0.0)
        assert report.miss == pytest.approx(1.0)
        assert report.der == pytest.approx(1.0)

    def test_partial_confusion(self):
        reference = ann([("A", 0.0, 10.0)])
        hypothesis = ann([("A", 0.0, 8.0), ("B", 8.0, 10.0)])
        report = der(reference, hypothesis, collar=0.0)
        assert report.miss == 0.0
        assert report.false_alarm == 0.0
        assert report.confusion == pytest.approx(0.2)
        assert report.der == pytest.approx(0.2)
        assert report.scored_time == pytest.approx(10.0)

    def test_decomposition_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            reference = random_annotation(rng, ["A", "B", "C"])
            hypothesis = random_annotation(rng, ["x", "y"])
            report = der(reference, hypothesis)
            assert report.der == report.miss + report.false_alarm + report.confusion

    def test_label_renaming_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            reference = random_annotation(rng, ["A", "B"])
            hypothesis = random_annotation(rng, ["x", "y", "z"])
            renamed_ref = ann([("ref_" + l, a, b) for l, a, b in reference.segments])
            renamed_hyp = ann([("hyp_" + l, a, b) for l, a, b in hypothesis.segments])
            assert der(reference, hypothesis).der == pytest.approx(
                der(renamed_ref, renamed_hyp).der
            )

    def test_collar_monotonicity(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            reference = random_annotation(rng, ["A", "B"])
            hypothesis = random_annotation(rng, ["x", "y"])
            previous_time = np.inf
            previous_error = np.inf
            for collar in (0.0, 0.1, 0.25, 0.5):
                report = der(reference, hypothesis, collar=collar)
                error_seconds = report.der * report.scored_time
                assert report.scored_time <= previous_time + 1e-9
                assert error_seconds <= previous_error + 1e-9
                previous_time = report.scored_time
                previous_error = error_seconds

    def test_collar_rejects_negative(self):
        with pytest.raises(ValueError):
            der(ann([]), ann([]), collar=-1.0)


class TestCountConfusion:
    def test_diagonal(self):
        result = count_confusion([(1, 1), (2, 2), (2, 2), (6, 6)])
        matrix = result.matrix
        assert matrix[1, 1] == 1
        assert matrix[2, 2] == 2
        assert matrix[6, 6] == 1
        assert matrix.sum() == 4

    def test_seven_plus_bucket(self):
        result = count_confusion([(6, 7)])
        assert result.matrix[7, 6] == 1
        assert result.buckets[7] == "7+"

    def test_empty(self):
        assert count_confusion([]).matrix.sum() == 0

    def test_column_sums_conserve_records(self):
        rng = np.random.default_rng(3)
        records = [(int(rng.integers(1, 9)), int(rng.integers(1, 9))) for _ in range(50)]
        matrix = count_confusion(records).matrix
        for r in range(1, 9):
            bucket = min(r, 7)
            expected = sum(1 for ref, _ in records if min(ref, 7) == bucket)
            assert matrix[:, bucket].sum() == expected

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            count_confusion([(-1, 2)])

    def test_csv_rows_shape(self):
        rows = CountConfusion(np.zeros((8, 8), dtype=int)).as_rows()
        assert len(rows) == 9 and len(rows[0]) == 9


class TestFramewiseBreakdown:
    def test_identical_streams_all_zero(self):
        reference = ann([("A", 0.0, 2.0)])
        rows = framewise_breakdown(reference, reference)
        assert all(r[2] == r[3] == r[4] == 0 for r in rows)

    def test_silent_hypothesis_misses_everything(self):
        reference = ann([("A", 0.0, 1.0), ("B", 0.5, 1.0)])
        rows = framewise_breakdown(reference, ann([]))
        miss = np.array([r[2] for r in rows])
        np.testing.assert_array_equal(miss[:50], 1)
        np.testing.assert_array_equal(miss[50:], 2)

    def test_single_confused_frame(self):
        reference = ann([("A", 0.0, 1.0)])
        hypothesis = ann([("A", 0.0, 0.99), ("B", 0.99, 1.0)])
        rows = framewise_breakdown(reference, hypothesis)
        confusion = np.array([r[4] for r in rows])
        assert confusion.sum() == 1
        assert confusion[99] == 1


class _InstantStream:
    chunk_len = 10

    def push(self, chunk):
        return None


class TestRtfBenchmark:
    def test_empty_input(self):
        points = rtf_benchmark(_InstantStream(), np.zeros((1, 0)))
        assert points == []

    def test_point_fields(self):
        points = rtf_benchmark(_InstantStream(), np.zeros((1, 30)), frames_per_second=10)
        assert len(points) == 3
        assert points[-1].stream_time == pytest.approx(3.0)
        assert all(p.rtf >= 0 for p in points)
