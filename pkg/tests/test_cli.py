import json

import pytest

from glauberlab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_emits_one_record(capsys):
    code, out, err = run(
        capsys,
        "simulate", "--dim", "1", "--side", "8", "--p", "0.7",
        "--horizon", "5", "--seed", "3",
    )
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 1
    rec = json.loads(lines[0])
    assert rec["kind"] == "simulate"
    assert rec["config"]["p"] == 0.7
    assert rec["outcome"] in ("plus", "minus", "stable_other", "unresolved")


def test_rerun_is_byte_identical(capsys):
    argv = ["couple", "--dim", "2", "--side", "6", "--p", "0.8",
            "--replicas", "3", "--seed", "5"]
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second
    assert len(first.splitlines()) == 3


def test_jobs_flag_does_not_change_output(capsys):
    base = ["sweep", "--rule", "r2", "--dim", "2", "--side", "5",
            "--ps", "0.1,0.3", "--replicas", "30", "--seed", "7"]
    _, serial, _ = run(capsys, *base, "--jobs", "1")
    _, parallel, _ = run(capsys, *base, "--jobs", "3")
    assert serial == parallel
    recs = [json.loads(line) for line in serial.splitlines()]
    assert [r["params"]["p"] for r in recs] == [0.1, 0.3]
    assert all("wall_time" not in r for r in recs)
    assert all("jobs" not in r["config"] for r in recs)


def test_csv_format(capsys):
    code, out, _ = run(
        capsys,
        "sweep", "--rule", "r2", "--dim", "2", "--side", "5",
        "--ps", "0.2", "--replicas", "20", "--seed", "1", "--format", "csv",
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("kind,experiment,p,estimate")
    assert len(lines) == 2


def test_output_file(tmp_path, capsys):
    target = tmp_path / "run.jsonl"
    code, out, _ = run(
        capsys,
        "bootstrap", "--dim", "2", "--side", "4", "--r", "2",
        "--p", "0.2", "--seed", "2", "--output", str(target),
    )
    assert code == 0
    assert out == ""
    rec = json.loads(target.read_text().splitlines()[0])
    assert rec["kind"] == "bootstrap"


def test_usage_error_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--no-such-flag"])
    assert exc.value.code == 1
    assert "error" in capsys.readouterr().err


def test_validation_error_exits_1(capsys):
    code, out, err = run(
        capsys,
        "couple", "--dim", "2", "--side", "6", "--p", "0.9", "--eps", "3/10",
    )
    assert code == 1
    assert "disagree" in err


def test_missing_required_field_exits_1(capsys):
    # schema rejects the request (dim missing) and the client reports it
    code, _, err = run(capsys, "simulate", "--side", "8", "--p", "0.7",
                       "--horizon", "1")
    assert code == 1
    assert "rejected" in err


def test_locality_pass_and_fail_codes(capsys):
    ok, out, _ = run(
        capsys,
        "locality", "--event", "growth", "--dim", "2", "--side", "20",
        "--radius", "8", "--trials", "3", "--seed", "1",
    )
    assert ok == 0
    assert json.loads(out.splitlines()[0])["changes"] == 0
    bad, out, _ = run(
        capsys,
        "locality", "--event", "growth", "--dim", "2", "--side", "20",
        "--radius", "0", "--trials", "6", "--seed", "1",
    )
    assert bad == 2
    assert json.loads(out.splitlines()[0])["changes"] > 0


def test_verify_bounds_exit_code(capsys):
    code, out, _ = run(capsys, "verify-bounds", "--d-min", "5", "--d-max", "20")
    assert code == 0
    rec = json.loads(out.splitlines()[0])
    assert rec["all_hold"] is True


def test_env_seed_matches_flag_seed(capsys, monkeypatch):
    argv = ["simulate", "--dim", "1", "--side", "8", "--p", "0.7",
            "--horizon", "5"]
    _, flagged, _ = run(capsys, *argv, "--seed", "41")
    monkeypatch.setenv("GLAUBERLAB_SEED", "41")
    _, from_env, _ = run(capsys, *argv)
    assert flagged == from_env
    # explicit flag beats the environment
    _, reflagged, _ = run(capsys, *argv, "--seed", "42")
    assert reflagged != from_env


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("dim = 1\nside = 8\np = 0.7\nhorizon = 5\nseed = 3\n")
    _, from_file, _ = run(capsys, "simulate", "--config", str(cfg))
    _, from_flags, _ = run(
        capsys,
        "simulate", "--dim", "1", "--side", "8", "--p", "0.7",
        "--horizon", "5", "--seed", "3",
    )
    assert from_file == from_flags
    _, overridden, _ = run(capsys, "simulate", "--config", str(cfg), "--p", "0.9")
    assert json.loads(overridden.splitlines()[0])["config"]["p"] == 0.9


def test_config_file_hyphen_keys(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("dim = 1\nside = 8\np = 0.7\nhorizon = 5\ntrace-points = 4\n")
    _, out, _ = run(capsys, "simulate", "--config", str(cfg))
    assert len(json.loads(out.splitlines()[0])["magnetization_trace"]) == 4


def test_bad_config_file_exits_1(tmp_path, capsys):
    cfg = tmp_path / "broken.cfg"
    cfg.write_text("this line has no equals sign\n")
    code, _, err = run(capsys, "simulate", "--config", str(cfg))
    assert code == 1
    assert "bad config line" in err


def test_bad_rule_exits_1(capsys):
    code, _, err = run(
        capsys,
        "sweep", "--rule", "r2x", "--dim", "2", "--side", "5", "--ps", "0.2",
    )
    assert code == 1
    assert "unknown rule" in err
