"""Command-line interface.

Subcommands: ``generate`` (synthetic scenarios), ``run`` (offline or
online diarization), ``score`` (DER against a reference), ``bench-rtf``
(per-step real-time factor), and ``count-confusion`` (speaker-counting
confusion matrix).  Reports go to stdout or ``--out`` as JSON or CSV.

Exit codes: 0 on success, 2 on configuration errors, 3 on data errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import engine as engine_mod
from . import fileio, scenario as scenario_mod, scoring
from .backend import frame_index_features
from .stb import BlockTracingBuffer, FrameTracingBuffer
from .types import ConfigError, DataError


def _write_out(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _json_report(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _csv_text(rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerows(rows)
    return buffer.getvalue()


def cmd_generate(args) -> int:
    cfg = scenario_mod.GenConfig(
        num_speakers=args.speakers,
        duration_s=args.duration,
        overlap_ratio=args.overlap,
        mean_utterance_s=args.utterance,
        mean_gap_s=args.gap,
        prototype_dim=args.dim,
        max_prototype_cos=args.max_cos,
        seed=args.seed,
    )
    scn = scenario_mod.generate_scenario(cfg)
    _write_out(fileio.scenario_dumps(scn), args.out)
    return 0


def _load_run_config(args) -> engine_mod.RunConfig:
    payload: dict = {}
    if args.config:
        try:
            payload = json.loads(Path(args.config).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
    overrides = {
        "mode": args.mode,
        "backend": args.backend,
        "chunk_frames": args.chunk_frames,
        "block_frames": args.block_frames,
        "buffer_frames": args.buffer_frames,
        "similarity_margin": args.margin,
        "trained_cap": args.trained_cap,
        "threshold": args.threshold,
        "balanced_sampling": args.balanced,
        "seed": args.seed,
        "attractor_cap": args.cap,
        "oracle_noise": args.noise,
        "paths": args.paths,
    }
    payload.update({k: v for k, v in overrides.items() if v is not None})
    if payload.get("mode", "offline") != "offline" and "seed" not in payload:
        raise ConfigError("online modes require an explicit --seed")
    return engine_mod.config_from_dict(payload)


def _load_run_inputs(args, config):
    scn = weights = features = None
    if config.backend == "oracle":
        if not args.scenario:
            raise ConfigError("the oracle backend requires --scenario")
        scn = fileio.scenario_read(args.scenario)
    else:
        if not args.weights or not args.features:
            raise ConfigError("the toy backend requires --weights and --features")
        weights = fileio.weights_read(args.weights)
        features = fileio.feature_read(args.features)
    return scn, features, weights


def cmd_run(args) -> int:
    config = _load_run_config(args)
    scn, features, weights = _load_run_inputs(args, config)
    result = engine_mod.run(
        config,
        scenario=scn,
        features=features,
        weights=weights,
        recording_id=args.recording_id,
        include_timings=args.timings,
    )
    if args.out_rttm:
        fileio.rttm_write(result.annotation, args.out_rttm)
    _write_out(_json_report(result.report), args.out)
    return 0


def cmd_score(args) -> int:
    reference = fileio.rttm_read(args.ref)
    hypothesis = fileio.rttm_read(args.hyp)
    report = scoring.der(reference, hypothesis, collar=args.collar)
    if args.breakdown:
        rows = [("frame_index", "time_s", "miss", "fa", "confusion")]
        for frame, time_s, miss, fa, conf in scoring.framewise_breakdown(
            reference, hypothesis
        ):
            rows.append((frame, f"{time_s:.2f}", miss, fa, conf))
        Path(args.breakdown).write_text(_csv_text(rows))
    _write_out(_json_report(report.as_dict()), args.out)
    return 0


def cmd_bench_rtf(args) -> int:
    config = _load_run_config(args)
    if config.mode == "offline":
        config.mode = "online-bw"
    config.validate()
    scn, features, weights = _load_run_inputs(args, config)
    backend = engine_mod.build_backend(config, scn, weights)
    if config.backend == "oracle":
        features = frame_index_features(np.arange(scn.duration))
    engine = engine_mod.Diarizer(
        backend,
        similarity_margin=config.similarity_margin,
        trained_cap=config.trained_cap,
        paths=config.paths,
        seed=config.seed,
    )
    common = dict(
        capacity=config.buffer_frames,
        chunk_len=config.chunk_frames,
        threshold=config.threshold,
        balanced=config.balanced_sampling,
        seed=config.seed,
    )
    if config.mode == "online-fw":
        stream = FrameTracingBuffer(engine, **common)
    else:
        stream = BlockTracingBuffer(engine, block_len=config.block_frames, **common)
    points = scoring.rtf_benchmark(stream, features, frames_per_second=args.fps)
    rows = [("step", "stream_time_s", "wall_time_s", "rtf")]
    for i, point in enumerate(points, start=1):
        rows.append((i, f"{point.stream_time:.3f}", f"{point.wall_time:.6f}",
                     f"{point.rtf:.6f}"))
    _write_out(_csv_text(rows), args.out)
    return 0


def cmd_count_confusion(args) -> int:
    records = []
    for lineno, raw in enumerate(Path(args.records).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.lower().replace(" ", "") in ("ref,pred",):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise DataError(f"{args.records}: line {lineno} is not 'ref,pred'")
        try:
            records.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise DataError(
                f"{args.records}: line {lineno} has non-integer counts"
            ) from exc
    try:
        matrix = scoring.count_confusion(records)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    _write_out(_csv_text(matrix.as_rows()), args.out)
    return 0


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with RunConfig fields")
    parser.add_argument("--scenario", help="scenario JSON (oracle backend)")
    parser.add_argument("--features", help="GLAF feature file (toy backend)")
    parser.add_argument("--weights", help="GLAW weights file (toy backend)")
    parser.add_argument("--mode", choices=engine_mod.MODES)
    parser.add_argument("--backend", choices=engine_mod.BACKENDS)
    parser.add_argument("--chunk-frames", type=int, dest="chunk_frames")
    parser.add_argument("--block-frames", type=int, dest="block_frames")
    parser.add_argument("--buffer-frames", type=int, dest="buffer_frames")
    parser.add_argument("--margin", type=float)
    parser.add_argument("--trained-cap", type=int, dest="trained_cap")
    parser.add_argument("--threshold", type=float)
    parser.add_argument("--balanced", action=argparse.BooleanOptionalAction,
                        default=None)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--cap", type=int, help="per-block attractor cap")
    parser.add_argument("--noise", type=float, help="oracle embedding noise scale")
    parser.add_argument("--paths", choices=engine_mod.PATH_CHOICES)
    parser.add_argument("--recording-id", default="rec", dest="recording_id")
    parser.add_argument("--out", help="write the report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gladiar",
        description="Streaming speaker diarization engine and evaluation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a synthetic scenario")
    gen.add_argument("--speakers", type=int, default=2)
    gen.add_argument("--duration", type=float, default=300.0)
    gen.add_argument("--overlap", type=float, default=0.3)
    gen.add_argument("--utterance", type=float, default=2.0)
    gen.add_argument("--gap", type=float, default=None)
    gen.add_argument("--dim", type=int, default=256)
    gen.add_argument("--max-cos", type=float, default=0.25, dest="max_cos")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out")
    gen.set_defaults(func=cmd_generate)

    run = sub.add_parser("run", help="run diarization over a scenario or features")
    _add_run_options(run)
    run.add_argument("--out-rttm", dest="out_rttm", help="write the hypothesis RTTM here")
    run.add_argument("--timings", action="store_true",
                     help="include wall-clock time in the report")
    run.set_defaults(func=cmd_run)

    score = sub.add_parser("score", help="score a hypothesis RTTM against a reference")
    score.add_argument("--ref", required=True)
    score.add_argument("--hyp", required=True)
    score.add_argument("--collar", type=float, default=0.0)
    score.add_argument("--breakdown", help="write the frame-wise error CSV here")
    score.add_argument("--out")
    score.set_defaults(func=cmd_score)

    bench = sub.add_parser("bench-rtf", help="measure per-step real-time factor")
    _add_run_options(bench)
    bench.add_argument("--fps", type=float, default=10.0,
                       help="frames of audio per second of stream time")
    bench.set_defaults(func=cmd_bench_rtf)

    confusion = sub.add_parser(
        "count-confusion", help="tally speaker-counting results into a confusion matrix"
    )
    confusion.add_argument("--records", required=True,
                           help="CSV of 'ref,pred' speaker counts, one per line")
    confusion.add_argument("--out")
    confusion.set_defaults(func=cmd_count_confusion)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
