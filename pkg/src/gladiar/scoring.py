"""Diarization scoring and measurement.

Scoring is frame-based at 10 ms resolution: segments are rasterized
onto a fine grid, an optimal one-to-one speaker mapping between
reference and hypothesis is found by linear assignment on overlap, and
miss / false alarm / speaker confusion are accumulated per frame with
the standard accounting over possibly-overlapping speech.  The collar
excludes frames around reference segment boundaries only.
"""

from __future__ import annotations

import gc
import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .types import SegmentAnnotation, snap_to_frame

SCORING_FRAME_SECONDS = 0.01


@dataclass
class DerReport:
    """Diarization error rate and its decomposition.

    All error fields are fractions of the scored reference speech time
    (``scored_time``, in seconds); the decomposition
    ``der == miss + false_alarm + confusion`` is exact at frame
    resolution.
    """

    der: float
    miss: float
    false_alarm: float
    confusion: float
    scored_time: float

    def as_dict(self) -> dict:
        return {
            "der": self.der,
            "miss": self.miss,
            "false_alarm": self.false_alarm,
            "confusion": self.confusion,
            "scored_time": self.scored_time,
        }


def rasterize(
    annotation: SegmentAnnotation,
    num_frames: int,
    frame_seconds: float = SCORING_FRAME_SECONDS,
) -> tuple[np.ndarray, list[str]]:
    """Per-speaker boolean activity on the scoring grid."""
    labels = annotation.labels()
    activity = np.zeros((len(labels), num_frames), dtype=bool)
    row_of = {label: i for i, label in enumerate(labels)}
    for label, onset, offset in annotation.segments:
        start = max(0, snap_to_frame(onset, frame_seconds))
        stop = min(num_frames, snap_to_frame(offset, frame_seconds))
        activity[row_of[label], start:stop] = True
    return activity, labels


def _grid_frames(*annotations, frame_seconds: float) -> int:
    end = 0.0
    for ann in annotations:
        for _, _, offset in ann.segments:
            end = max(end, offset)
    return snap_to_frame(end, frame_seconds)


def _collar_mask(
    reference: SegmentAnnotation, collar: float, num_frames: int, frame_seconds: float
) -> np.ndarray:
    """Boolean mask of frames that are scored (outside every collar zone)."""
    scored = np.ones(num_frames, dtype=bool)
    if collar <= 0:
        return scored
    for _, onset, offset in reference.segments:
        for boundary in (onset, offset):
            start = max(0, snap_to_frame(boundary - collar, frame_seconds))
            stop = min(num_frames, snap_to_frame(boundary + collar, frame_seconds))
            scored[start:stop] = False
    return scored


def _optimal_mapping(ref_act: np.ndarray, hyp_act: np.ndarray) -> np.ndarray:
    """One-to-one speaker mapping maximizing overlapped frames.

    Returns an array over reference speakers holding the mapped
    hypothesis row, or -1 for unmapped reference speakers.
    """
    num_ref, num_hyp = ref_act.shape[0], hyp_act.shape[0]
    mapping = np.full(num_ref, -1, dtype=np.intp)
    if num_ref == 0 or num_hyp == 0:
        return mapping
    overlap = (ref_act.astype(np.float64) @ hyp_act.T.astype(np.float64))
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    mapping[rows] = cols
    return mapping


def _error_series(ref_act, hyp_act, mapping):
    """Per-frame (miss, false alarm, confusion, reference count) arrays."""
    n_ref = ref_act.sum(axis=0)
    n_hyp = hyp_act.sum(axis=0)
    mapped = [(i, j) for i, j in enumerate(mapping) if j >= 0]
    if mapped:
        ref_rows = np.array([i for i, _ in mapped])
        hyp_rows = np.array([j for _, j in mapped])
        n_correct = (ref_act[ref_rows] & hyp_act[hyp_rows]).sum(axis=0)
    else:
        n_correct = np.zeros(ref_act.shape[1], dtype=np.int64)
    miss = np.maximum(n_ref - n_hyp, 0)
    false_alarm = np.maximum(n_hyp - n_ref, 0)
    confusion = np.minimum(n_ref, n_hyp) - n_correct
    return miss, false_alarm, confusion, n_ref


def der(
    reference: SegmentAnnotation,
    hypothesis: SegmentAnnotation,
    collar: float = 0.0,
    frame_seconds: float = SCORING_FRAME_SECONDS,
) -> DerReport:
    """Diarization error rate of a hypothesis against a reference."""
    if collar < 0:
        raise ValueError("collar must be non-negative")
    num_frames = _grid_frames(reference, hypothesis, frame_seconds=frame_seconds)
    ref_act, _ = rasterize(reference, num_frames, frame_seconds)
    hyp_act, _ = rasterize(hypothesis, num_frames, frame_seconds)
    scored = _collar_mask(reference, collar, num_frames, frame_seconds)
    ref_act = ref_act[:, scored]
    hyp_act = hyp_act[:, scored]
    mapping = _optimal_mapping(ref_act, hyp_act)
    miss, false_alarm, confusion, n_ref = _error_series(ref_act, hyp_act, mapping)
    total = float(n_ref.sum())
    denom = total if total > 0 else 1.0
    m = float(miss.sum()) / denom
    fa = float(false_alarm.sum()) / denom
    conf = float(confusion.sum()) / denom
    return DerReport(
        der=m + fa + conf,
        miss=m,
        false_alarm=fa,
        confusion=conf,
        scored_time=total * frame_seconds,
    )


def framewise_breakdown(
    reference: SegmentAnnotation,
    hypothesis: SegmentAnnotation,
    frame_seconds: float = SCORING_FRAME_SECONDS,
) -> list[tuple[int, float, int, int, int]]:
    """Per-frame error counts using the recording-level optimal mapping.

    Returns rows (frame_index, time_s, miss, false_alarm, confusion),
    suitable for CSV emission.
    """
    num_frames = _grid_frames(reference, hypothesis, frame_seconds=frame_seconds)
    ref_act, _ = rasterize(reference, num_frames, frame_seconds)
    hyp_act, _ = rasterize(hypothesis, num_frames, frame_seconds)
    mapping = _optimal_mapping(ref_act, hyp_act)
    miss, false_alarm, confusion, _ = _error_series(ref_act, hyp_act, mapping)
    return [
        (t, t * frame_seconds, int(miss[t]), int(false_alarm[t]), int(confusion[t]))
        for t in range(num_frames)
    ]


COUNT_BUCKETS = ("0", "1", "2", "3", "4", "5", "6", "7+")


@dataclass
class CountConfusion:
    """Speaker-counting confusion matrix, bucketed at seven-plus.

    ``matrix[p][r]`` is the number of recordings with predicted bucket p
    and reference bucket r; buckets follow :data:`COUNT_BUCKETS`.
    """

    matrix: np.ndarray
    buckets: tuple = COUNT_BUCKETS

    def as_rows(self) -> list[list]:
        header = ["pred\\ref", *self.buckets]
        rows = [header]
        for p, bucket in enumerate(self.buckets):
            rows.append([bucket, *self.matrix[p].tolist()])
        return rows


def _bucket(count: int) -> int:
    if count < 0:
        raise ValueError("speaker counts must be non-negative")
    return min(count, 7)


def count_confusion(records) -> CountConfusion:
    """Tally (reference count, predicted count) pairs into a confusion matrix."""
    matrix = np.zeros((len(COUNT_BUCKETS), len(COUNT_BUCKETS)), dtype=np.int64)
    for ref_count, pred_count in records:
        matrix[_bucket(pred_count), _bucket(ref_count)] += 1
    return CountConfusion(matrix)


@dataclass
class RtfPoint:
    """One streaming step: cumulative stream time, wall time, their ratio."""

    stream_time: float
    wall_time: float
    rtf: float


def rtf_benchmark(stream, features, frames_per_second: float = 10.0) -> list[RtfPoint]:
    """Real-time factor of a streaming run, one point per pushed chunk.

    Wall-clock time of each ``push`` is divided by the chunk's stream
    duration.  The garbage collector is paused during the measured loop
    so step timings reflect the engine, not allocator pauses.
    """
    chunk_len = stream.chunk_len
    num_frames = features.shape[1]
    points: list[RtfPoint] = []
    chunk_seconds = chunk_len / frames_per_second
    stream_time = 0.0
    was_enabled = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        for start in range(0, num_frames - num_frames % chunk_len, chunk_len):
            chunk = features[:, start:start + chunk_len]
            begin = time.perf_counter()
            stream.push(chunk)
            wall = time.perf_counter() - begin
            stream_time += chunk_seconds
            points.append(RtfPoint(stream_time, wall, wall / chunk_seconds))
    finally:
        if was_enabled:
            gc.enable()
    return points
