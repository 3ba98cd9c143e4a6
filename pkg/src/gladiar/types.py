"""Shared domain types, error classes, and input validation helpers.

Matrix conventions used throughout the package:

* feature matrices are ``F x T`` (one column per frame),
* embedding matrices are ``D x T``,
* posterior and activity matrices are ``S x T`` (one row per speaker).

One frame covers 100 ms of audio; segment times given in seconds are
snapped to this grid with round-half-up.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FRAME_SECONDS = 0.1
FRAMES_PER_SECOND = 10


class ConfigError(ValueError):
    """Invalid configuration (CLI exit code 2)."""


class DataError(ValueError):
    """Malformed or inconsistent input data (CLI exit code 3)."""


def as_float_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array with finite entries."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if a.size and not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite values")
    return a


def as_float_vector(x, name: str = "vector") -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {a.shape}")
    if a.size and not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite values")
    return a


def check_posterior(y, name: str = "posterior") -> np.ndarray:
    """Validate an S x T matrix of probabilities in the open interval (0, 1)."""
    a = as_float_matrix(y, name)
    if a.size and (a.min() <= 0.0 or a.max() >= 1.0):
        raise ValueError(f"{name} entries must lie strictly in (0, 1)")
    return a


def check_activity(y, name: str = "activity") -> np.ndarray:
    """Validate an S x T matrix with entries in {0, 1}; returns int8."""
    a = np.asarray(y)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if a.size and not np.isin(a, (0, 1)).all():
        raise ValueError(f"{name} entries must be 0 or 1")
    return a.astype(np.int8)


def snap_to_frame(seconds: float, frame_seconds: float = FRAME_SECONDS) -> int:
    """Snap a time in seconds to a frame index, rounding halves up.

    A small epsilon absorbs float representation error so that values
    that are mathematically exact halves (e.g. 0.35 / 0.1) round up
    reliably.
    """
    if frame_seconds <= 0:
        raise ValueError("frame_seconds must be positive")
    return int(np.floor(seconds / frame_seconds + 0.5 + 1e-9))


@dataclass
class AttractorSet:
    """Ordered speaker attractors with their existence probabilities.

    ``vectors`` is an S x D array (one row per attractor); ``existence``
    holds the matching probabilities, each strictly inside (0, 1).
    """

    vectors: np.ndarray
    existence: np.ndarray

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=np.float64))
        if self.vectors.size == 0:
            self.vectors = self.vectors.reshape(0, self.vectors.shape[-1] if self.vectors.ndim == 2 else 0)
        self.existence = np.asarray(self.existence, dtype=np.float64).reshape(-1)
        if len(self.vectors) != len(self.existence):
            raise ValueError(
                f"got {len(self.vectors)} attractors but "
                f"{len(self.existence)} existence probabilities"
            )
        if self.existence.size and (
            self.existence.min() <= 0.0 or self.existence.max() >= 1.0
        ):
            raise ValueError("existence probabilities must lie strictly in (0, 1)")

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def empty(cls, dim: int) -> "AttractorSet":
        return cls(np.zeros((0, dim)), np.zeros(0))


@dataclass
class LinearHead:
    """Affine scoring head mapping an attractor to an existence logit."""

    weight: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        self.weight = as_float_vector(self.weight, "head weight")
        self.bias = float(self.bias)
        if not np.isfinite(self.bias):
            raise ValueError("head bias must be finite")


@dataclass
class SegmentAnnotation:
    """Per-recording speech segments: (speaker label, onset s, offset s)."""

    recording_id: str
    segments: list[tuple[str, float, float]] = field(default_factory=list)

    def __post_init__(self):
        for label, onset, offset in self.segments:
            if not (offset > onset >= 0.0):
                raise ValueError(
                    f"segment ({label!r}, {onset}, {offset}) must satisfy "
                    "offset > onset >= 0"
                )

    def labels(self) -> list[str]:
        """Speaker labels in order of first appearance."""
        seen: list[str] = []
        for label, _, _ in self.segments:
            if label not in seen:
                seen.append(label)
        return seen

    def total_speech(self) -> float:
        return sum(offset - onset for _, onset, offset in self.segments)


@dataclass
class RelativeEmbedding:
    """Per-(block, local speaker) vector used for inter-block clustering.

    Carries its provenance so that same-block pairs can be turned into
    cannot-link constraints downstream.
    """

    vector: np.ndarray
    block_index: int
    local_index: int

    def __post_init__(self):
        self.vector = as_float_vector(self.vector, "relative embedding")
        self.block_index = int(self.block_index)
        self.local_index = int(self.local_index)
