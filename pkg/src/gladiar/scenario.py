"""Synthetic scenario generation.

A scenario is desk-scale ground truth: per-speaker speech segments on
the frame grid plus one unit prototype vector per speaker.  Speech and
gap durations are drawn from exponential distributions whose means are
adjusted until the measured overlap ratio lands within 5 percentage
points of the target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import Scenario, ScenarioSpeaker
from .ops import activity_to_segments
from .types import FRAMES_PER_SECOND, ConfigError, SegmentAnnotation

OVERLAP_TOLERANCE = 0.05


@dataclass
class GenConfig:
    num_speakers: int = 2
    duration_s: float = 300.0
    overlap_ratio: float | None = 0.3
    mean_utterance_s: float = 2.0
    mean_gap_s: float | None = None
    prototype_dim: int = 256
    max_prototype_cos: float = 0.25
    seed: int = 0

    def validate(self) -> None:
        if self.num_speakers < 1:
            raise ConfigError("num_speakers must be at least 1")
        if self.duration_s <= 0:
            raise ConfigError("duration_s must be positive")
        if self.mean_utterance_s <= 0:
            raise ConfigError("mean_utterance_s must be positive")
        if self.mean_gap_s is not None and self.mean_gap_s <= 0:
            raise ConfigError("mean_gap_s must be positive")
        if self.prototype_dim < 1:
            raise ConfigError("prototype_dim must be at least 1")
        if not 0 < self.max_prototype_cos < 1:
            raise ConfigError("max_prototype_cos must lie in (0, 1)")
        if self.overlap_ratio is None:
            if self.mean_gap_s is None:
                raise ConfigError("need either overlap_ratio or mean_gap_s")
            return
        if not 0 <= self.overlap_ratio < 1:
            raise ConfigError("overlap_ratio must lie in [0, 1)")
        bound = (self.num_speakers - 1) / self.num_speakers
        if self.overlap_ratio > bound:
            raise ConfigError(
                f"overlap target {self.overlap_ratio} is infeasible for "
                f"{self.num_speakers} speakers (bound {bound:.3f})"
            )


def measured_overlap(scenario: Scenario) -> float:
    """Overlapped speech frames as a fraction of all speech frames."""
    concurrency = scenario.activity().sum(axis=0)
    speech = int((concurrency >= 1).sum())
    if speech == 0:
        return 0.0
    return float((concurrency >= 2).sum()) / speech


def reference_annotation(scenario: Scenario, recording_id: str = "rec") -> SegmentAnnotation:
    """Ground-truth segments of a scenario on the engine frame grid."""
    labels = [spk.label for spk in scenario.speakers]
    return activity_to_segments(
        scenario.activity(), labels=labels, recording_id=recording_id
    )


def _stationary_overlap(rho: float, num_speakers: int) -> float:
    """Overlap ratio of independent speakers each active a fraction rho of time."""
    silent = (1.0 - rho) ** num_speakers
    any_speech = 1.0 - silent
    if any_speech <= 0.0:
        return 0.0
    exactly_one = num_speakers * rho * (1.0 - rho) ** (num_speakers - 1)
    return (any_speech - exactly_one) / any_speech


def _solve_duty_cycle(target: float, num_speakers: int) -> float:
    lo, hi = 1e-6, 1.0 - 1e-6
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _stationary_overlap(mid, num_speakers) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _draw_segments(rng, duration: int, utt_frames: float, gap_frames: float):
    segments = []
    t = rng.exponential(gap_frames)
    while t < duration:
        length = max(1.0, rng.exponential(utt_frames))
        start = int(round(t))
        stop = min(duration, int(round(t + length)))
        if stop > start:
            segments.append((start, stop))
        t += length + rng.exponential(gap_frames)
    return segments


def _draw_all(rng, cfg: GenConfig, duration: int, gap_frames: float):
    utt_frames = cfg.mean_utterance_s * FRAMES_PER_SECOND
    speakers = []
    for i in range(cfg.num_speakers):
        segments = _draw_segments(rng, duration, utt_frames, gap_frames)
        attempts = 0
        while not segments and attempts < 100:
            segments = _draw_segments(rng, duration, utt_frames, gap_frames)
            attempts += 1
        if not segments:
            raise ConfigError(
                "could not place any speech; lower mean_gap_s or raise duration_s"
            )
        speakers.append((f"spk{i}", segments))
    return speakers


def _draw_prototypes(rng, cfg: GenConfig) -> np.ndarray:
    protos = np.zeros((cfg.num_speakers, cfg.prototype_dim))
    for i in range(cfg.num_speakers):
        for _ in range(1000):
            v = rng.standard_normal(cfg.prototype_dim)
            v /= np.linalg.norm(v)
            if i == 0 or (protos[:i] @ v).max() <= cfg.max_prototype_cos:
                protos[i] = v
                break
        else:
            raise ConfigError(
                f"could not draw {cfg.num_speakers} prototypes with pairwise "
                f"cosine below {cfg.max_prototype_cos}; raise prototype_dim"
            )
    return protos


def generate_scenario(cfg: GenConfig) -> Scenario:
    """Deterministically generate a scenario matching the configuration."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    duration = int(round(cfg.duration_s * FRAMES_PER_SECOND))
    prototypes = _draw_prototypes(rng, cfg)

    if cfg.overlap_ratio is None:
        gap_frames = cfg.mean_gap_s * FRAMES_PER_SECOND
        speakers = _draw_all(rng, cfg, duration, gap_frames)
        return _assemble(cfg, duration, speakers, prototypes)

    utt_frames = cfg.mean_utterance_s * FRAMES_PER_SECOND
    rho = _solve_duty_cycle(cfg.overlap_ratio, cfg.num_speakers)
    rho_lo, rho_hi = 1e-4, 1.0 - 1e-4
    best = None
    best_gap = np.inf
    for _ in range(40):
        gap_frames = utt_frames * (1.0 - rho) / rho
        speakers = _draw_all(rng, cfg, duration, gap_frames)
        scenario = _assemble(cfg, duration, speakers, prototypes)
        gap = abs(measured_overlap(scenario) - cfg.overlap_ratio)
        if gap < best_gap:
            best, best_gap = scenario, gap
        if gap <= OVERLAP_TOLERANCE - 0.005:
            return scenario
        if measured_overlap(scenario) < cfg.overlap_ratio:
            rho_lo = rho
        else:
            rho_hi = rho
        rho = 0.5 * (rho_lo + rho_hi)
    if best_gap <= OVERLAP_TOLERANCE:
        return best
    raise ConfigError(
        f"could not reach overlap {cfg.overlap_ratio} within "
        f"{OVERLAP_TOLERANCE} (best miss {best_gap:.3f}); "
        "adjust duration_s or mean_utterance_s"
    )


def _assemble(cfg, duration, speakers, prototypes) -> Scenario:
    return Scenario(
        duration=duration,
        speakers=[
            ScenarioSpeaker(label, prototypes[i], segments)
            for i, (label, segments) in enumerate(speakers)
        ],
        seed=cfg.seed,
        max_prototype_cos=cfg.max_prototype_cos,
    )
