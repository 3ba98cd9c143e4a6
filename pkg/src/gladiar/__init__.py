"""Streaming speaker diarization with global/local attractor fusion.

The package splits a recording into short blocks, runs attractor-based
diarization per block, clusters the blocks' relative speaker embeddings
under cannot-link constraints to recover the full speaker inventory,
and fuses the result with a recording-level estimate.  Speaker-tracing
buffers turn the same engine into a low-latency online system, and the
scoring module measures everything (DER with collar, counting confusion,
real-time factor).
"""

from .backend import (
    BackendOutput,
    BlockResult,
    OracleBackend,
    Scenario,
    ScenarioSpeaker,
    ToyBackend,
    ToyWeights,
    frame_index_features,
    relative_embed,
    split_blocks,
)
from .clustering import CLCKMeans
from .engine import Diarizer, RunConfig, RunResult, run
from .losses import (
    Minibatch,
    PermutationResult,
    both_loss,
    diarization_loss,
    existence_loss,
    global_loss,
    local_loss,
    pairwise_loss,
    vct_reshape,
    vct_schedule,
)
from .ops import (
    activity_to_segments,
    binarize,
    count_speakers,
    existence_probs,
    matrix_correlation,
    pad_speakers,
    posteriors,
    segments_to_activity,
    sigmoid,
)
from .scenario import GenConfig, generate_scenario, measured_overlap, reference_annotation
from .scoring import CountConfusion, DerReport, count_confusion, der, framewise_breakdown, rtf_benchmark
from .stb import BlockTracingBuffer, ChunkOutput, FrameTracingBuffer, sampling_weights, select_frames, solve_permutation
from .stitch import (
    AffinityMatrix,
    build_affinity,
    clamp_count,
    count_by_eigenratio,
    eigenvalues_desc,
    fuse_global_local,
    stitch,
)
from .types import (
    AttractorSet,
    ConfigError,
    DataError,
    LinearHead,
    RelativeEmbedding,
    SegmentAnnotation,
)

__version__ = "0.1.0"

__all__ = [
    "AffinityMatrix",
    "AttractorSet",
    "BackendOutput",
    "BlockResult",
    "BlockTracingBuffer",
    "CLCKMeans",
    "ChunkOutput",
    "ConfigError",
    "CountConfusion",
    "DataError",
    "DerReport",
    "Diarizer",
    "FrameTracingBuffer",
    "GenConfig",
    "LinearHead",
    "Minibatch",
    "OracleBackend",
    "PermutationResult",
    "RelativeEmbedding",
    "RunConfig",
    "RunResult",
    "Scenario",
    "ScenarioSpeaker",
    "SegmentAnnotation",
    "ToyBackend",
    "ToyWeights",
    "activity_to_segments",
    "binarize",
    "both_loss",
    "build_affinity",
    "clamp_count",
    "count_by_eigenratio",
    "count_confusion",
    "count_speakers",
    "der",
    "diarization_loss",
    "eigenvalues_desc",
    "existence_loss",
    "existence_probs",
    "frame_index_features",
    "framewise_breakdown",
    "fuse_global_local",
    "generate_scenario",
    "global_loss",
    "local_loss",
    "matrix_correlation",
    "measured_overlap",
    "pad_speakers",
    "pairwise_loss",
    "posteriors",
    "reference_annotation",
    "relative_embed",
    "rtf_benchmark",
    "run",
    "sampling_weights",
    "segments_to_activity",
    "select_frames",
    "sigmoid",
    "solve_permutation",
    "split_blocks",
    "stitch",
    "vct_reshape",
    "vct_schedule",
]
