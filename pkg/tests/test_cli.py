"""Command-line interface behavior and exit codes."""

import json

import pytest

from gladiar.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def scenario_file(tmp_path, capsys):
    path = tmp_path / "scenario.json"
    code, _, _ = run_cli(
        capsys, "generate", "--speakers", "2", "--duration", "60",
        "--overlap", "0.2", "--dim", "16", "--seed", "5", "--out", str(path),
    )
    assert code == 0
    return path


def test_generate_writes_scenario(scenario_file):
    payload = json.loads(scenario_file.read_text())
    assert payload["duration_frames"] == 600
    assert len(payload["speakers"]) == 2


def test_run_offline_report(scenario_file, capsys, tmp_path):
    rttm = tmp_path / "hyp.rttm"
    code, out, _ = run_cli(
        capsys, "run", "--scenario", str(scenario_file), "--seed", "5",
        "--threshold", "0.6", "--out-rttm", str(rttm),
    )
    assert code == 0
    report = json.loads(out)
    assert report["estimated_speakers"] == 2
    assert rttm.read_text().startswith("SPEAKER rec 1 ")


def test_run_is_byte_deterministic(scenario_file, capsys, tmp_path):
    outputs = []
    for i in range(2):
        rttm = tmp_path / f"hyp{i}.rttm"
        report = tmp_path / f"report{i}.json"
        code, _, _ = run_cli(
            capsys, "run", "--scenario", str(scenario_file), "--mode", "online-bw",
            "--seed", "7", "--threshold", "0.6", "--out-rttm", str(rttm),
            "--out", str(report),
        )
        assert code == 0
        outputs.append((rttm.read_bytes(), report.read_bytes()))
    assert outputs[0] == outputs[1]


def test_score_round_trip(scenario_file, capsys, tmp_path):
    hyp = tmp_path / "hyp.rttm"
    code, _, _ = run_cli(
        capsys, "run", "--scenario", str(scenario_file), "--seed", "5",
        "--threshold", "0.6", "--out-rttm", str(hyp),
    )
    assert code == 0
    ref = tmp_path / "ref.rttm"
    code, _, _ = run_cli(
        capsys, "run", "--scenario", str(scenario_file), "--seed", "5",
        "--threshold", "0.6", "--out-rttm", str(ref),
    )
    breakdown = tmp_path / "frames.csv"
    code, out, _ = run_cli(
        capsys, "score", "--ref", str(ref), "--hyp", str(hyp),
        "--collar", "0.25", "--breakdown", str(breakdown),
    )
    assert code == 0
    report = json.loads(out)
    assert report["der"] == 0.0
    header = breakdown.read_text().splitlines()[0]
    assert header == "frame_index,time_s,miss,fa,confusion"


def test_online_requires_explicit_seed(scenario_file, capsys):
    code, _, err = run_cli(
        capsys, "run", "--scenario", str(scenario_file), "--mode", "online-bw"
    )
    assert code == 2
    assert "seed" in err


def test_config_file_merged_with_flag_overrides(scenario_file, capsys, tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"mode": "online-bw", "seed": 3, "threshold": 0.6}))
    code, out, _ = run_cli(
        capsys, "run", "--config", str(config), "--scenario", str(scenario_file),
        "--mode", "offline",
    )
    assert code == 0
    assert json.loads(out)["mode"] == "offline"


def test_bad_config_key_exits_2(scenario_file, capsys, tmp_path):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"not_a_field": 1}))
    code, _, err = run_cli(
        capsys, "run", "--config", str(config), "--scenario", str(scenario_file)
    )
    assert code == 2


def test_missing_scenario_exits_3(capsys, tmp_path):
    code, _, err = run_cli(capsys, "run", "--scenario", str(tmp_path / "nope.json"))
    assert code == 3


def test_malformed_rttm_exits_3(capsys, tmp_path):
    bad = tmp_path / "bad.rttm"
    bad.write_text("garbage\n")
    code, _, err = run_cli(capsys, "score", "--ref", str(bad), "--hyp", str(bad))
    assert code == 3
    assert "line 1" in err


def test_count_confusion(capsys, tmp_path):
    records = tmp_path / "records.csv"
    records.write_text("ref,pred\n2,2\n6,7\n")
    code, out, _ = run_cli(capsys, "count-confusion", "--records", str(records))
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("pred\\ref")
    matrix = [line.split(",") for line in lines[1:]]
    assert matrix[2][3] == "1"  # pred 2, ref 2
    assert matrix[7][7] == "1"  # pred 7+, ref 6


def test_bench_rtf_csv(scenario_file, capsys):
    code, out, _ = run_cli(
        capsys, "bench-rtf", "--scenario", str(scenario_file), "--seed", "5",
        "--buffer-frames", "200", "--fps", "10",
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "step,stream_time_s,wall_time_s,rtf"
    assert len(lines) == 61
