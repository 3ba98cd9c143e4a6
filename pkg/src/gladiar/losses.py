"""Forward-value reference implementations of the training objectives.

These compute loss values for given inputs; there are no gradients and
no optimizer.  They serve as executable documentation of the math and as
oracles for the permutation machinery used elsewhere in the pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .clustering import normalize_rows
from .types import check_activity, check_posterior


@dataclass
class PermutationResult:
    """Minimal permutation-free loss and the permutation achieving it.

    ``permutation[k]`` is the reference speaker index matched to
    estimated speaker ``k``; it is a bijection on the speaker indices.
    """

    loss: float
    permutation: np.ndarray


@dataclass
class Minibatch:
    """A batch of equal-length sequences with optional parallel labels.

    ``features`` has shape (B, T, F); ``labels``, when present, has shape
    (B, T, S) and is cut identically by :func:`vct_reshape`.
    """

    features: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 3:
            raise ValueError("features must have shape (B, T, F)")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.ndim != 3 or self.labels.shape[:2] != self.features.shape[:2]:
                raise ValueError("labels must share the (B, T) leading shape")

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def length(self) -> int:
        return self.features.shape[1]


def binary_cross_entropy_sum(targets, probs) -> float:
    """Sum of element-wise binary cross entropy between same-shape arrays."""
    t = np.asarray(targets, dtype=np.float64)
    p = np.asarray(probs, dtype=np.float64)
    if t.shape != p.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {p.shape}")
    return float(-np.sum(t * np.log(p) + (1.0 - t) * np.log1p(-p)))


def diarization_loss(reference, estimated) -> PermutationResult:
    """Permutation-free diarization loss via linear assignment.

    The S x S cost matrix holds the summed binary cross entropy of every
    (reference speaker, estimated speaker) pairing; the assignment that
    minimizes the total is the optimal permutation, and the loss is that
    total averaged over all T * S cells.
    """
    ref = check_activity(reference, "reference").astype(np.float64)
    est = check_posterior(estimated, "estimated")
    if ref.shape != est.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {est.shape}")
    num_speakers, num_frames = ref.shape
    if num_speakers < 1 or num_frames < 1:
        raise ValueError("need at least one speaker and one frame")
    log_p = np.log(est)
    log_q = np.log1p(-est)
    cost = -(ref @ log_p.T + (1.0 - ref) @ log_q.T)  # cost[i, k]
    rows, cols = linear_sum_assignment(cost)
    permutation = np.empty(num_speakers, dtype=np.intp)
    permutation[cols] = rows
    loss = float(cost[rows, cols].sum() / (num_frames * num_speakers))
    return PermutationResult(loss, permutation)


def existence_loss(num_speakers: int, existence) -> float:
    """Attractor existence loss: BCE against (1, ..., 1, 0) over S+1 attractors."""
    z = np.asarray(existence, dtype=np.float64).reshape(-1)
    if len(z) != num_speakers + 1:
        raise ValueError(
            f"expected {num_speakers + 1} probabilities, got {len(z)}"
        )
    targets = np.ones(num_speakers + 1)
    targets[-1] = 0.0
    return binary_cross_entropy_sum(targets, z) / (num_speakers + 1)


def pairwise_loss(
    embeddings,
    speaker_of,
    num_speakers: int,
    margin: float = 0.5,
    block_of=None,
    attract_same_block: bool = False,
) -> float:
    """Contrastive loss over ordered pairs of relative speaker embeddings.

    Same-speaker pairs are pulled together (1 - cosine); different-speaker
    pairs are pushed below the margin via a hinge.  Each ordered pair is
    weighted by 1 / (S^2 c_i c_j) with c_i the number of embeddings
    assigned to that speaker.

    ``attract_same_block`` switches the attraction indicator to
    same-block pairs instead of same-speaker pairs (a compatibility
    reading; it attracts embeddings that belong to different speakers,
    so it is off by default).
    """
    emb = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    if emb.size == 0:
        return 0.0
    speakers = np.asarray(speaker_of, dtype=np.intp).reshape(-1)
    if len(speakers) != emb.shape[0]:
        raise ValueError(
            f"got {len(speakers)} speaker assignments for {emb.shape[0]} embeddings"
        )
    if speakers.size and (speakers.min() < 0 or speakers.max() >= num_speakers):
        raise ValueError(f"speaker ids must lie in [0, {num_speakers})")
    if attract_same_block:
        if block_of is None:
            raise ValueError("attract_same_block requires block_of")
        groups = np.asarray(block_of, dtype=np.intp).reshape(-1)
        if len(groups) != emb.shape[0]:
            raise ValueError("block_of length does not match embeddings")
        same = groups[:, None] == groups[None, :]
    else:
        same = speakers[:, None] == speakers[None, :]
    counts = np.bincount(speakers, minlength=num_speakers).astype(np.float64)
    c = counts[speakers]
    sim = normalize_rows(emb) @ normalize_rows(emb).T
    weight = 1.0 / (num_speakers**2 * np.outer(c, c))
    # Self-similarity can exceed 1 by rounding error; clamp so self-pairs
    # contribute exactly zero and the loss stays non-negative.
    attract = np.maximum(1.0 - sim, 0.0)
    repel = np.maximum(sim - margin, 0.0)
    return float(np.sum(weight * np.where(same, attract, repel)))


def local_loss(block_losses, pairwise: float, alpha: float = 1.0, gamma: float = 1.0) -> float:
    """Average per-block (diarization + alpha * existence) plus gamma * pairwise."""
    blocks = list(block_losses)
    if not blocks:
        raise ValueError("need at least one block")
    per_block = sum(d + alpha * e for d, e in blocks) / len(blocks)
    return per_block + gamma * pairwise


def global_loss(diar: float, exist: float, alpha: float = 1.0) -> float:
    return diar + alpha * exist


def both_loss(local: float, global_: float) -> float:
    return local + global_


def vct_reshape(batch: Minibatch, target_len: int) -> Minibatch:
    """Reshape a (B, T) minibatch into (B * T / T', T') by cutting sequences.

    Each sequence is cut into contiguous pieces of the target length, in
    order, so the total number of frames is conserved exactly.
    """
    if target_len < 1:
        raise ValueError("target length must be positive")
    size, length = batch.size, batch.length
    if length % target_len != 0:
        raise ValueError(
            f"sequence length {length} is not divisible by target {target_len}"
        )
    pieces = length // target_len
    features = batch.features.reshape(size * pieces, target_len, batch.features.shape[2])
    labels = None
    if batch.labels is not None:
        labels = batch.labels.reshape(size * pieces, target_len, batch.labels.shape[2])
    return Minibatch(features, labels)


VCT_LENGTHS = (50, 100, 200, 500, 1000)


def vct_schedule(rng: np.random.Generator, lengths=VCT_LENGTHS) -> int | None:
    """Draw the chunk length for one iteration: None half the time, else uniform."""
    if rng.random() < 0.5:
        return None
    return int(rng.choice(lengths))
