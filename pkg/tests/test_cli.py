"""Command line behavior: exit codes, report shapes, trace round trips."""

import json
import subprocess
import sys

import pytest


def test_verified_run_exits_zero(run_cli):
    r = run_cli("verify", "ring-par", "--size", "1", "--inserters", "1")
    assert r.code == 0
    assert "outcome: VERIFIED" in r.out
    assert "Algorithm" in r.out and "Model Size" in r.out
    assert "States Stored/Matched" in r.out and "Search Depth" in r.out


def test_violation_exits_one_and_writes_the_counterexample(run_cli, tmp_path):
    path = tmp_path / "bug.trace"
    r = run_cli("verify", "ring-seq", "--size", "2", "--inserters", "2",
                "--trace-out", str(path))
    assert r.code == 1
    assert "outcome: VIOLATION" in r.out
    assert "violation:" in r.out
    assert f"counterexample written to {path}" in r.err
    assert path.exists()
    head = path.read_text().splitlines()
    assert head[0] == "ringcheck-trace v1"


def test_violation_default_trace_path_is_announced(run_cli, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    r = run_cli("verify", "ring-seq", "--size", "2", "--inserters", "2")
    assert r.code == 1
    assert "counterexample written to ring-seq-counterexample.trace" in r.err
    assert (tmp_path / "ring-seq-counterexample.trace").exists()


def test_resource_limit_exits_two(run_cli):
    r = run_cli("verify", "ring-par", "--size", "2", "--inserters", "1",
                "--max-states", "3")
    assert r.code == 2
    assert "outcome: RESOURCE_LIMIT" in r.out


def test_usage_errors_exit_sixty_four(run_cli):
    assert run_cli("verify").code == 64
    assert run_cli("verify", "ring-quantum").code == 64
    assert run_cli("frobnicate").code == 64
    r = run_cli("verify", "barrier", "--inserters", "2")
    assert r.code == 64
    assert "error" in r.err


def test_blocking_flag_fixes_the_sequential_race(run_cli):
    r = run_cli("verify", "ring-seq", "--size", "2", "--inserters", "2",
                "--blocking")
    assert r.code == 0
    assert "outcome: VERIFIED" in r.out


def test_json_report_schema(run_cli):
    r = run_cli("verify", "ring-par", "--size", "1", "--inserters", "1", "--json")
    assert r.code == 0
    doc = json.loads(r.out)
    assert doc["schema"] == "ringcheck-report-1"
    assert doc["report"]["outcome"] == "VERIFIED"
    assert doc["report"]["states_stored"] >= 1
    assert doc["scenario"]["algorithm"] == "ring-par"
    assert doc["scenario"]["total"] == 2
    assert doc["trace"] is None


def test_stable_output_is_byte_identical(run_cli):
    args = ("verify", "trace", "--size", "2", "--stable-output")
    a, b = run_cli(*args), run_cli(*args)
    assert a.out == b.out and a.code == b.code == 0
    args_json = args + ("--json",)
    assert run_cli(*args_json).out == run_cli(*args_json).out


def test_simulate_is_deterministic_per_seed(run_cli, tmp_path):
    t1, t2 = tmp_path / "a.trace", tmp_path / "b.trace"
    r1 = run_cli("simulate", "ring-par", "--size", "2", "--inserters", "2",
                 "--seed", "9", "--trace-out", str(t1))
    r2 = run_cli("simulate", "ring-par", "--size", "2", "--inserters", "2",
                 "--seed", "9", "--trace-out", str(t2))
    assert r1.code == r2.code == 0
    assert r1.out == r2.out
    assert t1.read_bytes() == t2.read_bytes()


def test_simulate_json_schema(run_cli):
    r = run_cli("simulate", "barrier", "--size", "3", "--seed", "1", "--json")
    assert r.code == 0
    doc = json.loads(r.out)
    assert doc["schema"] == "ringcheck-simulation-1"
    assert doc["quiescent"] is True
    assert doc["failures"] == []
    assert doc["seed"] == 1


def test_replay_of_a_simulated_schedule_is_clean(run_cli, tmp_path):
    path = tmp_path / "walk.trace"
    run_cli("simulate", "recovery", "--size", "3", "--seed", "2",
            "--trace-out", str(path))
    r = run_cli("replay", str(path))
    assert r.code == 0
    assert "replay complete: quiescent, all properties hold" in r.out
    assert "step 1:" in r.out
    assert "  | " in r.out  # per-step state delta lines

    quiet = run_cli("replay", str(path), "--quiet")
    assert quiet.code == 0
    assert "  | " not in quiet.out


def test_replay_reproduces_the_violation(run_cli, tmp_path):
    path = tmp_path / "bug.trace"
    run_cli("verify", "ring-seq", "--size", "2", "--inserters", "2",
            "--trace-out", str(path))
    r = run_cli("replay", str(path), "--quiet")
    assert r.code == 1
    assert "violation reproduced" in r.out


def test_replay_rejects_damaged_traces(run_cli, tmp_path):
    path = tmp_path / "mangled.trace"
    path.write_text("ringcheck-trace v1\nalgorithm=ring-par\n")
    assert run_cli("replay", str(path)).code == 65

    missing = run_cli("replay", str(tmp_path / "absent.trace"))
    assert missing.code == 64

    wrong = tmp_path / "wrong.trace"
    wrong.write_text(
        "ringcheck-trace v1\nalgorithm=ring-par\nsize=2\ninserters=0\n"
        "blocking=0\nfailure=none\nsteps=1\npid=0 kind=event fd=9 cmd=new_rhs\n")
    r = run_cli("replay", str(wrong))
    assert r.code == 65
    assert "not enabled" in r.err


def test_replay_rejects_unbuildable_scenarios(run_cli, tmp_path):
    path = tmp_path / "unbuildable.trace"
    path.write_text(
        "ringcheck-trace v1\nalgorithm=recovery\nsize=1\ninserters=0\n"
        "blocking=0\nfailure=nondet\nsteps=0\n")
    r = run_cli("replay", str(path))
    assert r.code == 65
    assert "unbuildable" in r.err


def test_version_flag(run_cli):
    r = run_cli("--version")
    assert r.code == 0
    assert "ringcheck" in r.out


def test_module_entry_point_smoke():
    proc = subprocess.run(
        [sys.executable, "-m", "ringcheck", "verify", "ring-par",
         "--size", "1", "--inserters", "1"],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0
    assert "outcome: VERIFIED" in proc.stdout
