"""Core numerical primitives shared by every stage of the pipeline.

All operations are pure functions on immutable inputs.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .types import (
    FRAME_SECONDS,
    AttractorSet,
    LinearHead,
    SegmentAnnotation,
    as_float_matrix,
    check_activity,
    check_posterior,
    snap_to_frame,
)


def sigmoid(x):
    """Numerically stable logistic function (scalar or array)."""
    return expit(x)


def posteriors(embeddings, attractors: AttractorSet, take: int | None = None) -> np.ndarray:
    """Per-speaker, per-frame speech probabilities from attractor/embedding dot products.

    Returns a ``take x T`` matrix whose (s, t) entry is
    ``sigmoid(attractor_s . embedding_t)``, using the first ``take``
    attractors (all of them when ``take`` is None).
    """
    emb = as_float_matrix(embeddings, "embeddings")
    if take is None:
        take = len(attractors)
    if take < 0 or take > len(attractors):
        raise ValueError(f"take={take} out of range for {len(attractors)} attractors")
    if take == 0:
        return np.zeros((0, emb.shape[1]))
    if attractors.dim != emb.shape[0]:
        raise ValueError(
            f"attractor dim {attractors.dim} != embedding dim {emb.shape[0]}"
        )
    return sigmoid(attractors.vectors[:take] @ emb)


def existence_probs(vectors, head: LinearHead) -> np.ndarray:
    """Existence probability ``sigmoid(w . a + b)`` for each attractor vector."""
    vecs = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if vecs.size == 0:
        return np.zeros(0)
    if vecs.shape[1] != head.weight.shape[0]:
        raise ValueError(
            f"attractor dim {vecs.shape[1]} != head dim {head.weight.shape[0]}"
        )
    return sigmoid(vecs @ head.weight + head.bias)


def count_speakers(existence, return_saturated: bool = False):
    """Number of speakers implied by a list of existence probabilities.

    Counts attractors until the first probability below 0.5.  When every
    entry is at least 0.5 the list length is returned and the estimate is
    flagged as saturated: a decoder would have kept going, so callers may
    want to raise the attractor cap.
    """
    z = np.asarray(existence, dtype=np.float64).reshape(-1)
    below = np.nonzero(z < 0.5)[0]
    if below.size:
        count, saturated = int(below[0]), False
    else:
        count, saturated = len(z), len(z) > 0
    if return_saturated:
        return count, saturated
    return count


def matrix_correlation(a, b) -> float:
    """Sum of products of deviations from the grand means of two same-shape matrices."""
    am = as_float_matrix(a, "first matrix")
    bm = as_float_matrix(b, "second matrix")
    if am.shape != bm.shape:
        raise ValueError(f"shape mismatch: {am.shape} vs {bm.shape}")
    if am.size == 0:
        return 0.0
    return float(np.sum((am - am.mean()) * (bm - bm.mean())))


def pad_speakers(y, target: int) -> np.ndarray:
    """Append all-zero speaker rows to reach ``target`` rows."""
    a = np.asarray(y, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected 2-D matrix, got shape {a.shape}")
    if target < a.shape[0]:
        raise ValueError(f"target {target} smaller than current {a.shape[0]} rows")
    if target == a.shape[0]:
        return a.copy()
    return np.vstack([a, np.zeros((target - a.shape[0], a.shape[1]))])


def binarize(posterior, threshold: float = 0.5) -> np.ndarray:
    """Threshold posteriors into {0, 1} activity; ties count as speech."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    p = check_posterior(posterior)
    return (p >= threshold).astype(np.int8)


def activity_to_segments(
    activity,
    labels: list[str] | None = None,
    frame_seconds: float = FRAME_SECONDS,
    recording_id: str = "rec",
) -> SegmentAnnotation:
    """Convert a binary activity matrix into per-speaker speech segments.

    A maximal run of ones spanning frames [t0, t1] becomes the segment
    [t0 * fs, (t1 + 1) * fs).
    """
    act = check_activity(activity)
    if frame_seconds <= 0:
        raise ValueError("frame_seconds must be positive")
    if labels is None:
        labels = [f"spk{i}" for i in range(act.shape[0])]
    if len(labels) != act.shape[0]:
        raise ValueError(f"got {len(labels)} labels for {act.shape[0]} rows")
    segments = []
    for row, label in zip(act, labels):
        padded = np.concatenate([[0], row, [0]])
        edges = np.diff(padded)
        starts = np.nonzero(edges == 1)[0]
        stops = np.nonzero(edges == -1)[0]
        for t0, t1 in zip(starts, stops):
            segments.append((label, t0 * frame_seconds, t1 * frame_seconds))
    return SegmentAnnotation(recording_id, segments)


def segments_to_activity(
    annotation: SegmentAnnotation,
    num_frames: int,
    labels: list[str] | None = None,
    frame_seconds: float = FRAME_SECONDS,
) -> tuple[np.ndarray, list[str]]:
    """Rasterize segments onto the frame grid; inverse of activity_to_segments.

    Segment boundaries are snapped to the grid with round-half-up, so the
    round trip through activity_to_segments is the identity for
    frame-aligned input.  ``labels`` fixes the row order (and keeps rows
    for silent speakers); by default rows follow first appearance.
    """
    if frame_seconds <= 0:
        raise ValueError("frame_seconds must be positive")
    if labels is None:
        labels = annotation.labels()
    row_of = {label: i for i, label in enumerate(labels)}
    activity = np.zeros((len(labels), num_frames), dtype=np.int8)
    for label, onset, offset in annotation.segments:
        if label not in row_of:
            raise ValueError(f"segment label {label!r} missing from labels")
        start = max(0, snap_to_frame(onset, frame_seconds))
        stop = min(num_frames, snap_to_frame(offset, frame_seconds))
        activity[row_of[label], start:stop] = 1
    return activity, list(labels)
