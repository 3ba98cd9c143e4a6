"""End-to-end inference: the offline pipeline and the online runners.

The offline path per recording: backend inference, per-block local
posteriors, relative-embedding affinity, eigenratio speaker counting,
count clamping, cannot-link constrained clustering, stitching, and
finally the global/local fusion rule.  Online modes drive the same
engine through a speaker-tracing buffer, one chunk at a time.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .backend import (
    BackendOutput,
    OracleBackend,
    Scenario,
    ToyBackend,
    ToyWeights,
    frame_index_features,
)
from .clustering import CLCKMeans
from .ops import activity_to_segments, count_speakers, posteriors
from .stb import BlockTracingBuffer, FrameTracingBuffer
from .stitch import (
    build_affinity,
    clamp_count,
    count_by_eigenratio,
    eigenvalues_desc,
    fuse_global_local,
    stitch,
)
from .types import ConfigError, SegmentAnnotation

MODES = ("offline", "online-fw", "online-bw")
BACKENDS = ("oracle", "toy")
PATH_CHOICES = ("fused", "global-only", "local-only")


@dataclass
class RunConfig:
    """Everything a run needs besides the input itself.

    Frame-count parameters: ``chunk_frames`` is the online processing
    unit, ``block_frames`` the local-attractor block length, and
    ``buffer_frames`` the tracing-buffer capacity.
    """

    mode: str = "offline"
    backend: str = "oracle"
    chunk_frames: int = 10
    block_frames: int = 50
    buffer_frames: int = 1000
    similarity_margin: float = 0.5
    trained_cap: int = 4
    threshold: float = 0.5
    balanced_sampling: bool = True
    seed: int = 0
    attractor_cap: int = 4
    oracle_noise: float = 0.0
    paths: str = "fused"

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.paths not in PATH_CHOICES:
            raise ConfigError(f"paths must be one of {PATH_CHOICES}, got {self.paths!r}")
        if min(self.chunk_frames, self.block_frames, self.buffer_frames) < 1:
            raise ConfigError("frame-count parameters must be positive")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie in (0, 1)")
        if not 0.0 <= self.similarity_margin < 1.0:
            raise ConfigError("similarity_margin must lie in [0, 1)")
        if self.trained_cap < 1 or self.attractor_cap < 1:
            raise ConfigError("speaker caps must be at least 1")
        if self.oracle_noise < 0:
            raise ConfigError("oracle_noise must be non-negative")
        if self.mode == "online-bw":
            if self.block_frames % self.chunk_frames != 0:
                raise ConfigError("block_frames must be divisible by chunk_frames")
            if self.buffer_frames % self.block_frames != 0:
                raise ConfigError("buffer_frames must be divisible by block_frames")
            if self.buffer_frames <= self.block_frames:
                raise ConfigError("buffer_frames must exceed block_frames")


def _canonical_cluster_order(labels: np.ndarray, num_clusters: int) -> np.ndarray:
    """Relabel clusters by the first appearance of any member.

    Relative embeddings arrive in block order, so this puts output rows
    in first-appearance order, like the recording-level attractor path;
    across streaming steps over a mostly-shared buffer it keeps cluster
    ids stable instead of shuffling them with the seeding.
    """
    first = np.full(num_clusters, np.iinfo(np.int64).max, dtype=np.int64)
    for position, label in enumerate(labels):
        if position < first[label]:
            first[label] = position
    new_of_old = np.empty(num_clusters, dtype=np.intp)
    new_of_old[np.argsort(first, kind="stable")] = np.arange(num_clusters)
    return new_of_old[labels]


class Diarizer:
    """Recording-level diarization on top of an inference backend."""

    def __init__(self, backend, similarity_margin: float = 0.5,
                 trained_cap: int = 4, paths: str = "fused", seed: int = 0):
        self.backend = backend
        self.similarity_margin = similarity_margin
        self.trained_cap = trained_cap
        self.paths = paths
        self.seed = seed

    def diarize(self, features) -> tuple[np.ndarray, dict]:
        """Posterior matrix for the given features plus bookkeeping info."""
        output = self.backend.infer(features)
        num_frames = output.embeddings.shape[1]
        global_count = count_speakers(output.global_attractors.existence)
        global_posterior = posteriors(
            output.embeddings, output.global_attractors, take=global_count
        )
        local_posterior, local_count = self._local_path(output, num_frames)

        if self.paths == "global-only":
            chosen, path = global_posterior, "global"
        elif self.paths == "local-only":
            chosen, path = local_posterior, "local"
        else:
            chosen = fuse_global_local(
                global_posterior, local_posterior, global_count, self.trained_cap
            )
            path = "global" if global_count < self.trained_cap else "local"
        info = {
            "global_count": global_count,
            "local_count": local_count,
            "path": path,
            "block_counts": output.block_counts(),
        }
        return chosen, info

    def _local_path(self, output: BackendOutput, num_frames: int):
        relatives = output.all_relatives()
        if not relatives:
            return np.zeros((0, num_frames)), 0
        affinity = build_affinity(relatives, self.similarity_margin)
        estimate = count_by_eigenratio(eigenvalues_desc(affinity.matrix))
        num_clusters = clamp_count(estimate, output.block_counts())
        vectors = np.stack([r.vector for r in relatives])
        labels = CLCKMeans(
            n_clusters=num_clusters, random_state=self.seed
        ).fit_predict(vectors, cannot_link=affinity.cannot_link_pairs())
        labels = _canonical_cluster_order(labels, num_clusters)

        blocks, assignments = [], []
        cursor = 0
        for block in output.blocks:
            local = len(block.attractors)
            posterior = posteriors(
                output.embeddings[:, block.start:block.stop], block.attractors
            )
            blocks.append((block.start, block.stop, posterior))
            assignments.append(labels[cursor:cursor + local])
            cursor += local
        stitched = stitch(blocks, assignments, num_clusters, num_frames)
        return stitched, num_clusters


@dataclass
class RunResult:
    annotation: SegmentAnnotation
    report: dict


def build_backend(config: RunConfig, scenario: Scenario | None = None,
                  weights: ToyWeights | None = None):
    if config.backend == "oracle":
        if scenario is None:
            raise ConfigError("the oracle backend needs a scenario")
        return OracleBackend(
            scenario,
            noise_scale=config.oracle_noise,
            cap=config.attractor_cap,
            block_len=config.block_frames,
        )
    if weights is None:
        raise ConfigError("the toy backend needs a weights file")
    return ToyBackend(weights, block_len=config.block_frames)


def run(
    config: RunConfig,
    scenario: Scenario | None = None,
    features: np.ndarray | None = None,
    weights: ToyWeights | None = None,
    recording_id: str = "rec",
    include_timings: bool = False,
) -> RunResult:
    """Execute one full run and return its annotation and report.

    Oracle runs derive their features (a frame-index matrix) from the
    scenario; toy runs require an explicit feature matrix.  The report
    holds counts only, so fixed-seed runs are byte-reproducible; wall
    times are added only on request.
    """
    config.validate()
    backend = build_backend(config, scenario, weights)
    if config.backend == "oracle":
        features = frame_index_features(np.arange(scenario.duration))
    elif features is None:
        raise ConfigError("the toy backend needs a feature matrix")

    engine = Diarizer(
        backend,
        similarity_margin=config.similarity_margin,
        trained_cap=config.trained_cap,
        paths=config.paths,
        seed=config.seed,
    )
    started = time.perf_counter()
    if config.mode == "offline":
        annotation, report = _run_offline(config, engine, features, recording_id)
    else:
        annotation, report = _run_online(config, engine, features, recording_id)
    report["mode"] = config.mode
    report["backend"] = config.backend
    report["seed"] = config.seed
    report["duration_frames"] = int(features.shape[1])
    if include_timings:
        report["wall_time_s"] = time.perf_counter() - started
    return RunResult(annotation, report)


def _run_offline(config, engine, features, recording_id):
    posterior, info = engine.diarize(features)
    activity = (posterior >= config.threshold).astype(np.int8)
    labels = [f"spk{i}" for i in range(posterior.shape[0])]
    annotation = activity_to_segments(
        activity, labels=labels, recording_id=recording_id
    )
    report = {
        "estimated_speakers": int(posterior.shape[0]),
        "global_count": int(info["global_count"]),
        "local_count": int(info["local_count"]),
        "path": info["path"],
    }
    return annotation, report


def _run_online(config, engine, features, recording_id):
    num_frames = features.shape[1]
    if num_frames % config.chunk_frames != 0:
        raise ConfigError(
            f"online modes need the duration ({num_frames} frames) divisible "
            f"by chunk_frames ({config.chunk_frames})"
        )
    common = dict(
        capacity=config.buffer_frames,
        chunk_len=config.chunk_frames,
        threshold=config.threshold,
        balanced=config.balanced_sampling,
        seed=config.seed,
        recording_id=recording_id,
    )
    if config.mode == "online-fw":
        stream = FrameTracingBuffer(engine, **common)
    else:
        stream = BlockTracingBuffer(engine, block_len=config.block_frames, **common)
    for start in range(0, num_frames, config.chunk_frames):
        stream.push(features[:, start:start + config.chunk_frames])
    annotation = stream.flush()
    report = {
        "estimated_speakers": int(stream.num_speakers),
        "chunks": int(stream.step_index),
    }
    return annotation, report


def config_from_dict(payload: dict) -> RunConfig:
    """Build a RunConfig from a JSON-style dict, rejecting unknown keys."""
    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**payload)


def config_to_dict(config: RunConfig) -> dict:
    return asdict(config)
