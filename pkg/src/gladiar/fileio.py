"""File formats: RTTM annotations, GLAF feature matrices, GLAW toy
network weights, and scenario JSON.

Binary layouts (all little-endian):

* GLAF features: magic ``GLAF``, version u32, F u32, T u32, then T
  frames of F float32 values each (frame-major).
* GLAW weights: magic ``GLAW``, version u32, then (F, D, cap) as u32,
  then row-major float32 tensors in this fixed order: encoder weight
  (D x F), encoder bias (D), existence head weight (D), existence head
  bias (1), attention output weight (D x D).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .backend import Scenario, ScenarioSpeaker, ToyWeights
from .types import DataError, LinearHead, SegmentAnnotation

FEATURE_MAGIC = b"GLAF"
WEIGHTS_MAGIC = b"GLAW"
FORMAT_VERSION = 1


def rttm_write(annotation: SegmentAnnotation, path) -> None:
    lines = []
    for label, onset, offset in annotation.segments:
        lines.append(
            f"SPEAKER {annotation.recording_id} 1 {onset:.2f} {offset - onset:.2f} "
            f"<NA> <NA> {label} <NA> <NA>\n"
        )
    Path(path).write_text("".join(lines))


def rttm_read(path) -> SegmentAnnotation:
    """Parse an RTTM file; tolerant of extra whitespace."""
    recording_id = None
    segments = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) < 8 or fields[0] != "SPEAKER":
            raise DataError(f"{path}: malformed RTTM line {lineno}: {raw!r}")
        try:
            onset = float(fields[3])
            duration = float(fields[4])
        except ValueError as exc:
            raise DataError(
                f"{path}: bad onset/duration on line {lineno}: {raw!r}"
            ) from exc
        if duration <= 0 or onset < 0:
            raise DataError(f"{path}: non-positive segment on line {lineno}")
        if recording_id is None:
            recording_id = fields[1]
        elif fields[1] != recording_id:
            raise DataError(
                f"{path}: line {lineno} switches recording id to {fields[1]!r}; "
                "one recording per file"
            )
        segments.append((fields[7], onset, onset + duration))
    return SegmentAnnotation(recording_id or "rec", segments)


def feature_write(features, path) -> None:
    """Write an F x T feature matrix in the GLAF binary format."""
    data = np.asarray(features, dtype=np.float64)
    if data.ndim != 2:
        raise DataError(f"features must be 2-D, got shape {data.shape}")
    num_features, num_frames = data.shape
    if num_features < 1:
        raise DataError("feature dimension F must be at least 1")
    payload = data.T.astype("<f4").tobytes()
    with open(path, "wb") as handle:
        handle.write(FEATURE_MAGIC)
        handle.write(struct.pack("<III", FORMAT_VERSION, num_features, num_frames))
        handle.write(payload)


def feature_read(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:4] != FEATURE_MAGIC:
        raise DataError(f"{path}: bad magic {blob[:4]!r}, expected {FEATURE_MAGIC!r}")
    if len(blob) < 16:
        raise DataError(f"{path}: truncated header ({len(blob)} bytes)")
    version, num_features, num_frames = struct.unpack("<III", blob[4:16])
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    if num_features < 1:
        raise DataError(f"{path}: feature dimension F must be at least 1")
    expected = 16 + 4 * num_features * num_frames
    if len(blob) != expected:
        raise DataError(
            f"{path}: expected {expected} bytes, got {len(blob)}"
        )
    data = np.frombuffer(blob, dtype="<f4", offset=16)
    return data.reshape(num_frames, num_features).T.astype(np.float64)


def weights_write(weights: ToyWeights, path) -> None:
    dim, num_features = weights.encoder_weight.shape
    tensors = [
        weights.encoder_weight,
        weights.encoder_bias,
        weights.head.weight,
        np.array([weights.head.bias]),
        weights.attn_out,
    ]
    with open(path, "wb") as handle:
        handle.write(WEIGHTS_MAGIC)
        handle.write(
            struct.pack("<IIII", FORMAT_VERSION, num_features, dim, weights.cap)
        )
        for tensor in tensors:
            handle.write(np.asarray(tensor, dtype="<f4").tobytes())


def weights_read(path) -> ToyWeights:
    blob = Path(path).read_bytes()
    if blob[:4] != WEIGHTS_MAGIC:
        raise DataError(f"{path}: bad magic {blob[:4]!r}, expected {WEIGHTS_MAGIC!r}")
    if len(blob) < 20:
        raise DataError(f"{path}: truncated header ({len(blob)} bytes)")
    version, num_features, dim, cap = struct.unpack("<IIII", blob[4:20])
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    sizes = [dim * num_features, dim, dim, 1, dim * dim]
    expected = 20 + 4 * sum(sizes)
    if len(blob) != expected:
        raise DataError(f"{path}: expected {expected} bytes, got {len(blob)}")
    flat = np.frombuffer(blob, dtype="<f4", offset=20).astype(np.float64)
    parts = np.split(flat, np.cumsum(sizes)[:-1])
    try:
        return ToyWeights(
            encoder_weight=parts[0].reshape(dim, num_features),
            encoder_bias=parts[1],
            head=LinearHead(parts[2], float(parts[3][0])),
            attn_out=parts[4].reshape(dim, dim),
            cap=cap,
        )
    except ValueError as exc:
        raise DataError(f"{path}: inconsistent weight tensors: {exc}") from exc


def scenario_dumps(scenario: Scenario) -> str:
    payload = {
        "duration_frames": scenario.duration,
        "seed": scenario.seed,
        "max_prototype_cos": scenario.max_prototype_cos,
        "speakers": [
            {
                "label": spk.label,
                "prototype": [float(x) for x in spk.prototype],
                "segments": [[int(a), int(b)] for a, b in spk.segments],
            }
            for spk in scenario.speakers
        ],
    }
    return json.dumps(payload, indent=2) + "\n"


def scenario_write(scenario: Scenario, path) -> None:
    Path(path).write_text(scenario_dumps(scenario))


def scenario_read(path) -> Scenario:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    try:
        speakers = [
            ScenarioSpeaker(
                label=spk["label"],
                prototype=np.asarray(spk["prototype"], dtype=np.float64),
                segments=[tuple(seg) for seg in spk["segments"]],
            )
            for spk in payload["speakers"]
        ]
        return Scenario(
            duration=payload["duration_frames"],
            speakers=speakers,
            seed=payload["seed"],
            max_prototype_cos=payload.get("max_prototype_cos", 0.25),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid scenario: {exc}") from exc
