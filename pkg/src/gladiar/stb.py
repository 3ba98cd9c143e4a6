"""Speaker-tracing buffers for online inference.

A tracing buffer stores past features together with the aligned
diarization results for them.  Each incoming chunk is diarized jointly
with the buffer content, the speaker order of the new estimate is
aligned to the stored results by maximizing matrix correlation, and the
newest columns are emitted, giving a per-chunk algorithmic latency of
one chunk.

Two update policies are provided:

* :class:`FrameTracingBuffer` keeps the most informative individual
  frames (weighted sampling without replacement).
* :class:`BlockTracingBuffer` keeps whole blocks of consecutive frames
  plus a sliding FIFO block of the newest frames, so block-local
  attractor extraction stays valid over the buffer.

States are single-owner mutable values: one stream per instance, steps
strictly sequential.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .ops import activity_to_segments, pad_speakers
from .types import SegmentAnnotation, as_float_matrix


def solve_permutation(reference, estimated, prefer_identity: bool = False) -> np.ndarray:
    """Speaker permutation aligning ``estimated`` rows to ``reference`` rows.

    Returns ``perm`` such that ``estimated[perm]`` maximizes the matrix
    correlation with the reference.  Because the grand means are
    invariant under row permutation, the maximization reduces to a
    linear assignment on the matrix of per-row deviation products.

    ``prefer_identity`` adds an infinitesimal bonus on the diagonal so
    that exact correlation ties (silent rows are indistinguishable)
    resolve to the current row order instead of an arbitrary one; it
    cannot override any genuine correlation preference.
    """
    ref = as_float_matrix(reference, "reference")
    est = as_float_matrix(estimated, "estimated")
    if ref.shape != est.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {est.shape}")
    num_speakers = ref.shape[0]
    if num_speakers == 0:
        return np.zeros(0, dtype=np.intp)
    ref_dev = ref - ref.mean()
    est_dev = est - est.mean()
    gain = ref_dev @ est_dev.T
    if prefer_identity:
        scale = np.abs(gain).max() + 1.0
        gain = gain + 1e-9 * scale * np.eye(num_speakers)
    rows, cols = linear_sum_assignment(gain, maximize=True)
    perm = np.empty(num_speakers, dtype=np.intp)
    perm[rows] = cols
    return perm


def sampling_weights(posteriors, balanced: bool = False) -> np.ndarray:
    """Per-frame sampling distribution for buffer updates.

    The base weight of a frame is the KL divergence of its
    speaker-normalized posterior from the uniform distribution, so frames
    where one speaker clearly dominates weigh most.  With ``balanced``
    each frame is additionally scaled by the summed per-speaker shares of
    its posterior mass, boosting frames of rarely-speaking speakers.

    An all-zero weight vector (pure silence or uniform posteriors
    everywhere) falls back to the uniform distribution.
    """
    y = as_float_matrix(posteriors, "posteriors")
    num_speakers, num_frames = y.shape
    if num_speakers < 1 or num_frames < 1:
        raise ValueError("need at least one speaker and one frame")
    col_sums = y.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        norm = np.where(col_sums > 0, y / col_sums, 0.0)
        log_term = np.where(norm > 0, np.log(norm * num_speakers), 0.0)
    weights = np.maximum((norm * log_term).sum(axis=0), 0.0)
    if balanced:
        row_sums = y.sum(axis=1, keepdims=True)
        shares = np.divide(y, row_sums, out=np.zeros_like(y), where=row_sums > 0)
        weights = weights * shares.sum(axis=0)
    total = weights.sum()
    if total <= 0.0:
        return np.full(num_frames, 1.0 / num_frames)
    return weights / total


def select_frames(weights, count: int, rng: np.random.Generator) -> np.ndarray:
    """Weighted sampling without replacement; indices returned in time order.

    Uses the exponential-keys method: an item's key is an exponential
    draw divided by its weight, and the ``count`` smallest keys win.
    Zero-weight items are only chosen once the positive ones run out.
    """
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if count > w.size:
        raise ValueError(f"cannot select {count} of {w.size} frames")
    if count == w.size:
        return np.arange(w.size)
    if w.sum() <= 0.0:
        w = np.ones_like(w)
    with np.errstate(divide="ignore"):
        keys = np.where(w > 0, rng.exponential(size=w.size) / w, np.inf)
    chosen = np.argpartition(keys, count)[:count]
    return np.sort(chosen)


@dataclass
class ChunkOutput:
    """Posterior for the newest chunk plus the persistent speaker labels."""

    posterior: np.ndarray
    labels: list[str]


@dataclass
class _StoredBlock:
    start: int  # global index of the block's first frame
    features: np.ndarray
    results: np.ndarray


class _TracingStream:
    """State shared by both buffer flavors: alignment, labels, flush."""

    def __init__(self, engine, chunk_len: int, threshold: float,
                 balanced: bool, seed, recording_id: str):
        self.engine = engine
        self.chunk_len = int(chunk_len)
        self.threshold = float(threshold)
        self.balanced = bool(balanced)
        self.rng = np.random.default_rng(seed)
        self.recording_id = recording_id
        self.num_speakers = 0
        self.step_index = 0
        self._chunks: list[np.ndarray] = []
        if self.chunk_len < 1:
            raise ValueError("chunk_len must be at least 1")

    def labels(self) -> list[str]:
        """Persistent global speaker ids, one per current output row."""
        return [f"spk{i}" for i in range(self.num_speakers)]

    def _check_chunk(self, chunk) -> np.ndarray:
        chunk = as_float_matrix(chunk, "chunk")
        if chunk.shape[1] != self.chunk_len:
            raise ValueError(
                f"chunk must have exactly {self.chunk_len} frames, got {chunk.shape[1]}"
            )
        return chunk

    def _align(self, posterior, reference, ref_width):
        """Pad to the running speaker count and align rows to the reference."""
        grown = max(self.num_speakers, posterior.shape[0])
        posterior = pad_speakers(posterior, grown)
        if ref_width > 0 and grown > 0:
            ref = pad_speakers(reference, grown)
            perm = solve_permutation(
                ref, posterior[:, :ref_width], prefer_identity=True
            )
            posterior = posterior[perm]
        self.num_speakers = grown
        return posterior

    def _emit(self, posterior) -> ChunkOutput:
        out = posterior[:, -self.chunk_len:]
        self._chunks.append(out)
        return ChunkOutput(out, self.labels())

    def flush(self) -> SegmentAnnotation:
        """Final segment annotation over everything pushed so far."""
        if not self._chunks:
            return SegmentAnnotation(self.recording_id, [])
        full = np.hstack([pad_speakers(c, self.num_speakers) for c in self._chunks])
        activity = (full >= self.threshold).astype(np.int8)
        return activity_to_segments(
            activity, labels=self.labels(), recording_id=self.recording_id
        )


class FrameTracingBuffer(_TracingStream):
    """Frame-wise speaker-tracing buffer.

    Keeps up to ``capacity`` individual frames chosen by weighted
    sampling; the stored results are the aligned posteriors, so the next
    step's permutation is solved against a consistent speaker order.
    """

    def __init__(self, engine, capacity: int = 1000, chunk_len: int = 10,
                 threshold: float = 0.5, balanced: bool = True, seed=0,
                 recording_id: str = "rec"):
        super().__init__(engine, chunk_len, threshold, balanced, seed, recording_id)
        if capacity < chunk_len:
            raise ValueError("capacity must be at least the chunk length")
        self.capacity = int(capacity)
        self._features: np.ndarray | None = None
        self._results: np.ndarray | None = None

    def push(self, chunk) -> ChunkOutput:
        chunk = self._check_chunk(chunk)
        self.step_index += 1
        if self._features is None:
            features = chunk
            stored_width = 0
            reference = None
        else:
            features = np.hstack([self._features, chunk])
            stored_width = self._features.shape[1]
            reference = self._results
        posterior, _ = self.engine.diarize(features)
        posterior = self._align(posterior, reference, stored_width)
        output = self._emit(posterior)

        self._features, self._results = features, posterior
        if features.shape[1] > self.capacity:
            if self.num_speakers > 0:
                weights = sampling_weights(posterior, balanced=self.balanced)
            else:
                weights = np.full(features.shape[1], 1.0 / features.shape[1])
            keep = select_frames(weights, self.capacity, self.rng)
            self._features = features[:, keep]
            self._results = posterior[:, keep]
        return output


class BlockTracingBuffer(_TracingStream):
    """Block-wise speaker-tracing buffer.

    The buffer is a list of stored blocks of ``block_len`` consecutive
    frames (the sampling buffer) followed by a FIFO block holding the
    newest frames.  Every step the FIFO advances by one chunk; whenever
    it has been fully replaced, the completed FIFO content becomes a
    candidate block and the sampling buffer is re-drawn by block-level
    weighted sampling.  Until the FIFO first fills, the stream behaves
    like the frame-wise buffer restricted to the FIFO contents.
    """

    def __init__(self, engine, capacity: int = 1000, block_len: int = 50,
                 chunk_len: int = 10, threshold: float = 0.5,
                 balanced: bool = True, seed=0, recording_id: str = "rec"):
        super().__init__(engine, chunk_len, threshold, balanced, seed, recording_id)
        if block_len % chunk_len != 0:
            raise ValueError("block_len must be divisible by chunk_len")
        if capacity % block_len != 0:
            raise ValueError("capacity must be divisible by block_len")
        if capacity <= block_len:
            raise ValueError("capacity must exceed block_len")
        self.capacity = int(capacity)
        self.block_len = int(block_len)
        self.sampling_blocks: list[_StoredBlock] = []
        self._fifo_features: np.ndarray | None = None
        self._fifo_results: np.ndarray | None = None
        self._fifo_start = 0

    @property
    def max_sampling_blocks(self) -> int:
        return self.capacity // self.block_len - 1

    def push(self, chunk) -> ChunkOutput:
        chunk = self._check_chunk(chunk)
        self.step_index += 1
        fifo = self._fifo_features
        old_fifo_results = self._fifo_results
        if fifo is None:
            fifo = chunk
        elif fifo.shape[1] < self.block_len:
            fifo = np.hstack([fifo, chunk])
        else:
            fifo = np.hstack([fifo[:, self.chunk_len:], chunk])
            self._fifo_start += self.chunk_len
        self._fifo_features = fifo

        stored = [b.features for b in self.sampling_blocks] + [fifo]
        features = np.hstack(stored)
        sampled_width = features.shape[1] - fifo.shape[1]
        posterior, _ = self.engine.diarize(features)
        # Steady state aligns against the stored sampling-buffer results;
        # the FIFO columns are excluded because the sliding window keeps
        # changing which speakers hold a local attractor there.  Until
        # the first block completes there is no sampling buffer, and the
        # filling FIFO's stored results act as the reference instead,
        # exactly like the frame-wise buffer.
        if sampled_width > 0:
            reference = np.hstack([b.results for b in self.sampling_blocks])
            ref_width = sampled_width
        else:
            reference = old_fifo_results
            ref_width = 0 if reference is None else reference.shape[1]
        posterior = self._align(posterior, reference, ref_width)
        output = self._emit(posterior)

        cursor = 0
        for block in self.sampling_blocks:
            width = block.features.shape[1]
            block.results = posterior[:, cursor:cursor + width]
            cursor += width
        self._fifo_results = posterior[:, sampled_width:]

        if self.step_index % (self.block_len // self.chunk_len) == 0:
            self._resample(posterior)
        return output

    def _resample(self, posterior) -> None:
        """Re-draw the sampling buffer now that the FIFO is fully replaced."""
        snapshot = _StoredBlock(
            self._fifo_start, self._fifo_features.copy(), self._fifo_results.copy()
        )
        candidates = self.sampling_blocks + [snapshot]
        if len(candidates) > self.max_sampling_blocks:
            if self.num_speakers > 0:
                frame_weights = sampling_weights(posterior, balanced=self.balanced)
            else:
                frame_weights = np.full(posterior.shape[1], 1.0 / posterior.shape[1])
            block_weights = []
            cursor = 0
            for block in candidates:
                width = block.features.shape[1]
                block_weights.append(frame_weights[cursor:cursor + width].sum())
                cursor += width
            keep = select_frames(
                np.asarray(block_weights), self.max_sampling_blocks, self.rng
            )
            candidates = [candidates[i] for i in keep]
        self.sampling_blocks = sorted(candidates, key=lambda b: b.start)
