"""Inference backends standing in for the trained diarization network.

The rest of the pipeline only ever sees a :class:`BackendOutput`: frame
embeddings, a recording-level attractor set, and per-block local
attractors with their relative embeddings.  Two backends produce it:

* :class:`OracleBackend` derives everything from synthetic ground truth,
  which makes downstream algorithmic claims testable at desk scale.
* :class:`ToyBackend` is a deterministic forward-only network (affine
  map + tanh, centroid attractors, one cross-attention layer) loadable
  from a weights file, exercising the same shape contracts on real
  feature matrices.

Backends are immutable after construction and their ``infer`` calls are
pure, so a speaker-tracing buffer that re-infers over resampled frames
gets bit-identical results for the frames it kept.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clustering import CLCKMeans
from .ops import count_speakers, existence_probs
from .types import (
    AttractorSet,
    LinearHead,
    RelativeEmbedding,
    as_float_matrix,
)

# Existence probability reported for a present speaker; keeps the
# counting rule exercised without saturating at exactly 1.
ORACLE_EXISTENCE = 1.0 - 1e-3

# Sub-stream tags for deterministic noise derivation.
_EMB_STREAM = 1
_REL_STREAM = 2


@dataclass
class ScenarioSpeaker:
    label: str
    prototype: np.ndarray
    segments: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.prototype = np.asarray(self.prototype, dtype=np.float64).reshape(-1)
        self.segments = [(int(a), int(b)) for a, b in self.segments]
        for a, b in self.segments:
            if not 0 <= a < b:
                raise ValueError(f"bad segment frame range ({a}, {b})")


@dataclass
class Scenario:
    """Synthetic ground truth: per-speaker frame segments plus prototype vectors."""

    duration: int
    speakers: list[ScenarioSpeaker]
    seed: int = 0
    max_prototype_cos: float = 0.25

    def __post_init__(self):
        self.duration = int(self.duration)
        if self.duration < 0:
            raise ValueError("duration must be non-negative")
        for spk in self.speakers:
            if not np.isclose(np.linalg.norm(spk.prototype), 1.0, atol=1e-6):
                raise ValueError(f"prototype of {spk.label!r} is not unit length")
            for a, b in spk.segments:
                if b > self.duration:
                    raise ValueError(
                        f"segment ({a}, {b}) of {spk.label!r} exceeds duration "
                        f"{self.duration}"
                    )
        protos = self.prototypes()
        if len(protos) >= 2:
            gram = protos @ protos.T
            off = gram[~np.eye(len(protos), dtype=bool)]
            if off.size and off.max() > self.max_prototype_cos + 1e-9:
                raise ValueError(
                    f"prototype cosine {off.max():.4f} exceeds the configured "
                    f"maximum {self.max_prototype_cos}"
                )

    @property
    def num_speakers(self) -> int:
        return len(self.speakers)

    def prototypes(self) -> np.ndarray:
        if not self.speakers:
            return np.zeros((0, 0))
        return np.stack([s.prototype for s in self.speakers])

    def activity(self) -> np.ndarray:
        """Ground-truth S x T binary activity on the frame grid."""
        act = np.zeros((len(self.speakers), self.duration), dtype=np.int8)
        for i, spk in enumerate(self.speakers):
            for a, b in spk.segments:
                act[i, a:b] = 1
        return act


@dataclass
class BlockResult:
    """Local inference for one block: frame range, attractors, relative embeddings."""

    start: int
    stop: int
    attractors: AttractorSet
    relatives: list[RelativeEmbedding]

    def __post_init__(self):
        if len(self.attractors) != len(self.relatives):
            raise ValueError(
                f"block [{self.start}, {self.stop}) has {len(self.attractors)} "
                f"attractors but {len(self.relatives)} relative embeddings"
            )


@dataclass
class BackendOutput:
    embeddings: np.ndarray
    global_attractors: AttractorSet
    blocks: list[BlockResult]

    def __post_init__(self):
        num_frames = self.embeddings.shape[1]
        cursor = 0
        for block in self.blocks:
            if block.start != cursor or block.stop <= block.start:
                raise ValueError("block ranges must partition the frame range")
            cursor = block.stop
        if self.blocks and cursor != num_frames:
            raise ValueError("block ranges must cover every frame")

    def all_relatives(self) -> list[RelativeEmbedding]:
        return [rel for block in self.blocks for rel in block.relatives]

    def block_counts(self) -> list[int]:
        return [len(block.attractors) for block in self.blocks]


def split_blocks(num_frames: int, block_len: int) -> list[tuple[int, int]]:
    """Consecutive [start, stop) ranges of ``block_len`` frames covering [0, T).

    The final block may be shorter than ``block_len``.
    """
    if block_len < 1:
        raise ValueError("block_len must be at least 1")
    if num_frames < 0:
        raise ValueError("num_frames must be non-negative")
    return [
        (start, min(start + block_len, num_frames))
        for start in range(0, num_frames, block_len)
    ]


def frame_index_features(frame_ids) -> np.ndarray:
    """Encode global frame indices as the 1 x T feature matrix oracle runs use."""
    ids = np.asarray(frame_ids, dtype=np.float64).reshape(-1)
    return ids[None, :]


def relative_embed(vectors, embeddings, attn_out) -> np.ndarray:
    """Single cross-attention layer converting attractors to relative embeddings.

    For each attractor a: ``a + W_o (E softmax(E^T a / sqrt(D)))`` with the
    full embedding sequence as keys and values.
    """
    a = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    emb = as_float_matrix(embeddings, "embeddings")
    w_o = as_float_matrix(attn_out, "attention output weight")
    dim = emb.shape[0]
    if a.size and a.shape[1] != dim:
        raise ValueError(f"attractor dim {a.shape[1]} != embedding dim {dim}")
    if w_o.shape != (dim, dim):
        raise ValueError(f"attention output weight must be {dim}x{dim}")
    if a.size == 0 or emb.shape[1] == 0:
        return np.zeros((0, dim)) if a.size == 0 else a.copy()
    logits = emb.T @ a.T / np.sqrt(dim)  # T x S
    logits -= logits.max(axis=0, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=0, keepdims=True)
    context = emb @ weights  # D x S
    return a + (w_o @ context).T


class OracleBackend:
    """Ground-truth-driven backend for a synthetic scenario.

    Features are expected as a 1 x T matrix of global frame indices (see
    :func:`frame_index_features`).  Embeddings are the normalized sum of
    the active speakers' prototypes plus Gaussian noise derived
    deterministically from (scenario seed, frame index); local attractors
    are the prototypes of the up-to-``cap`` speakers active per block.
    """

    def __init__(self, scenario: Scenario, noise_scale: float = 0.0,
                 cap: int = 4, block_len: int = 50):
        if cap < 1:
            raise ValueError("cap must be at least 1")
        if noise_scale < 0:
            raise ValueError("noise_scale must be non-negative")
        self.scenario = scenario
        self.noise_scale = float(noise_scale)
        self.cap = int(cap)
        self.block_len = int(block_len)
        self._prototypes = scenario.prototypes()
        self._activity = scenario.activity()
        dim = self._prototypes.shape[1] if scenario.speakers else 1
        self._dim = dim
        rng = np.random.default_rng([scenario.seed, _EMB_STREAM])
        # Embeddings are a pure per-frame function of the scenario, so the
        # whole table is built once and inference just slices it.
        sums = (
            self._prototypes.T @ self._activity
            if len(self._prototypes)
            else np.zeros((dim, scenario.duration))
        )
        norms = np.linalg.norm(sums, axis=0)
        table = np.divide(sums, norms, out=np.zeros_like(sums), where=norms > 1e-12)
        if self.noise_scale > 0 and scenario.duration:
            table = table + self.noise_scale * rng.standard_normal(
                (scenario.duration, dim)
            ).T
        self._embedding_table = table
        # Memo of deterministic per-(block, speaker) noise draws; purely a
        # cache of a pure function, so concurrent infer calls stay safe.
        self._relative_cache: dict[tuple[int, int], np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self._dim

    def infer(self, features) -> BackendOutput:
        feats = as_float_matrix(features, "features")
        if feats.shape[0] != 1:
            raise ValueError("oracle features must be a 1 x T frame-index matrix")
        ids = np.rint(feats[0]).astype(np.intp)
        if ids.size and (ids.min() < 0 or ids.max() >= self.scenario.duration):
            raise ValueError(
                f"frame indices must lie in [0, {self.scenario.duration})"
            )

        act = self._activity[:, ids] if self.scenario.speakers else np.zeros((0, ids.size), dtype=np.int8)
        embeddings = self._embedding_table[:, ids]
        blocks = [
            self._block_result(ids, act, start, stop)
            for start, stop in split_blocks(ids.size, self.block_len)
        ]
        return BackendOutput(embeddings, self._global_attractors(act), blocks)

    def _active_order(self, act_slice) -> np.ndarray:
        """Active speaker indices ordered by first appearance in the slice."""
        active = np.nonzero(act_slice.any(axis=1))[0]
        first = np.argmax(act_slice[active] > 0, axis=1)
        return active[np.argsort(first, kind="stable")]

    def _block_result(self, ids, act, start, stop) -> BlockResult:
        act_block = act[:, start:stop]
        order = self._active_order(act_block)
        if len(order) > self.cap:
            counts = act_block[order].sum(axis=1)
            keep = np.argsort(-counts, kind="stable")[: self.cap]
            order = order[keep]
        vectors = self._prototypes[order] if len(order) else np.zeros((0, self._dim))
        existence = np.full(len(order), ORACLE_EXISTENCE)
        block_key = int(ids[start])
        relatives = [
            RelativeEmbedding(
                self._relative_vector(block_key, int(spk)),
                block_index=start,
                local_index=j,
            )
            for j, spk in enumerate(order)
        ]
        return BlockResult(start, stop, AttractorSet(vectors, existence), relatives)

    def _relative_vector(self, block_key: int, spk: int) -> np.ndarray:
        cached = self._relative_cache.get((block_key, spk))
        if cached is None:
            rng = np.random.default_rng(
                [self.scenario.seed, _REL_STREAM, block_key, spk]
            )
            # Perturbation of expected norm noise_scale, so sigma keeps the
            # same meaning (fraction of the unit prototype) at any dim.
            noise = rng.standard_normal(self._dim) / np.sqrt(self._dim)
            cached = self._prototypes[spk] + self.noise_scale * noise
            self._relative_cache[(block_key, spk)] = cached
        return cached

    def _global_attractors(self, act) -> AttractorSet:
        order = self._active_order(act)[: min(self.cap, len(self.scenario.speakers))]
        if not len(order):
            return AttractorSet.empty(self._dim)
        return AttractorSet(
            self._prototypes[order], np.full(len(order), ORACLE_EXISTENCE)
        )


@dataclass
class ToyWeights:
    """Parameters of the toy forward network (see the GLAW file format)."""

    encoder_weight: np.ndarray  # D x F
    encoder_bias: np.ndarray  # D
    head: LinearHead
    attn_out: np.ndarray  # D x D
    cap: int = 4

    def __post_init__(self):
        self.encoder_weight = as_float_matrix(self.encoder_weight, "encoder weight")
        self.encoder_bias = np.asarray(self.encoder_bias, dtype=np.float64).reshape(-1)
        self.attn_out = as_float_matrix(self.attn_out, "attention output weight")
        self.cap = int(self.cap)
        dim = self.encoder_weight.shape[0]
        if self.encoder_bias.shape[0] != dim:
            raise ValueError("encoder bias dim does not match encoder weight")
        if self.head.weight.shape[0] != dim:
            raise ValueError("head dim does not match embedding dim")
        if self.attn_out.shape != (dim, dim):
            raise ValueError("attention output weight must be D x D")
        if self.cap < 1:
            raise ValueError("cap must be at least 1")

    @property
    def num_features(self) -> int:
        return self.encoder_weight.shape[1]

    @property
    def dim(self) -> int:
        return self.encoder_weight.shape[0]


class ToyBackend:
    """Deterministic forward-only network over real feature matrices.

    Embeddings come from a per-frame affine map with tanh; per block,
    candidate attractors are k-means centroids of the block's embeddings
    and the existence head decides how many survive, mirroring the way a
    decoder would emit attractors until the existence probability drops.
    """

    def __init__(self, weights: ToyWeights, block_len: int = 50):
        self.weights = weights
        self.block_len = int(block_len)
        self.cap = weights.cap

    @property
    def dim(self) -> int:
        return self.weights.dim

    def infer(self, features) -> BackendOutput:
        feats = as_float_matrix(features, "features")
        if feats.shape[0] != self.weights.num_features:
            raise ValueError(
                f"feature dim {feats.shape[0]} does not match the "
                f"{self.weights.num_features} expected by the weights"
            )
        w = self.weights
        embeddings = np.tanh(w.encoder_weight @ feats + w.encoder_bias[:, None])
        blocks = []
        for l, (start, stop) in enumerate(split_blocks(feats.shape[1], self.block_len)):
            attractors = self._attractors(embeddings[:, start:stop], seed=l)
            rel_vectors = relative_embed(attractors.vectors, embeddings, w.attn_out)
            relatives = [
                RelativeEmbedding(vec, block_index=start, local_index=j)
                for j, vec in enumerate(rel_vectors)
            ]
            blocks.append(BlockResult(start, stop, attractors, relatives))
        return BackendOutput(embeddings, self._attractors(embeddings, seed=-1), blocks)

    def _attractors(self, embeddings, seed: int) -> AttractorSet:
        """Centroid candidates ordered by cluster size, cut by the existence head.

        ``seed`` is the block index (-1 for the recording-level call) so
        repeated inference stays deterministic.
        """
        cols = embeddings.T
        if cols.shape[0] == 0:
            return AttractorSet.empty(self.dim)
        k = min(self.cap, cols.shape[0])
        model = CLCKMeans(n_clusters=k, random_state=seed + 2)
        labels = model.fit_predict(cols)
        sizes = np.bincount(labels, minlength=k)
        occupied = np.nonzero(sizes > 0)[0]
        order = occupied[np.argsort(-sizes[occupied], kind="stable")]
        candidates = model.cluster_centers_[order]
        # Clip away float saturation so the probabilities stay inside (0, 1).
        existence = np.clip(
            existence_probs(candidates, self.weights.head), 1e-12, 1.0 - 1e-12
        )
        count = count_speakers(existence)
        if count == 0:
            return AttractorSet.empty(self.dim)
        return AttractorSet(candidates[:count], existence[:count])
