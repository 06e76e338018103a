import csv
import json
import os

import pytest

import solverpick as sp
from solverpick.cli import run

from . import expected
from .conftest import FIXTURES, FIXTURE_FILES

DOC_PATHS = [str(FIXTURES / name) for name in FIXTURE_FILES]
RESULTS = str(FIXTURES / "results.csv")
MODEL = str(FIXTURES / "model.json")


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def run_ok(args):
    code = run(args)
    assert code == 0, args
    return code


# --- extract ---

def test_extract_matches_fixture_table(tmp_path):
    out = tmp_path / "features.csv"
    run_ok(["extract", *DOC_PATHS, "--out", str(out)])
    got = read_csv(out)
    want = read_csv(FIXTURES / "expected_features.csv")
    assert got[0] == want[0]
    assert sorted(got[1:]) == sorted(want[1:])
    # canonical output order: sorted by task id
    assert [r[0] for r in got[1:]] == sorted(r[0] for r in got[1:])


def test_extract_jobs_do_not_change_bytes(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_ok(["extract", *DOC_PATHS, "--jobs", "1", "--out", str(a)])
    run_ok(["extract", *DOC_PATHS, "--jobs", "4", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_extract_json_format(tmp_path, capsys):
    run_ok(["extract", DOC_PATHS[3], "--format", "json"])
    payload = json.loads(capsys.readouterr().out)
    assert payload[0]["task_id"] == "delta.lang:Tiny:g_true"
    assert payload[0]["size"] == 1


def test_extract_parse_error_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.lang"
    bad.write_text("(theory T (goal g (and true)))")
    assert run(["extract", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "bad.lang" in err and "at least 2" in err


def test_extract_missing_file_is_data_error(capsys):
    assert run(["extract", "/nonexistent.lang"]) == 2
    assert "/nonexistent.lang" in capsys.readouterr().err


# --- train / predict ---

@pytest.fixture(scope="module")
def features_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("features") / "features.csv"
    run_ok(["extract", *DOC_PATHS, "--out", str(path)])
    return str(path)


def test_train_then_predict_deterministic(tmp_path, features_csv):
    m1, m2 = tmp_path / "m1.json", tmp_path / "m2.json"
    base = ["train", "--features", features_csv, "--results", RESULTS,
            "--timeout", "10", "--trees", "12", "--seed", "42"]
    run_ok(base + ["--out", str(m1)])
    run_ok(base + ["--out", str(m2), "--jobs", "3"])
    assert m1.read_bytes() == m2.read_bytes()

    p1, p2 = tmp_path / "p1.csv", tmp_path / "p2.csv"
    run_ok(["predict", *DOC_PATHS, "--model", str(m1), "--out", str(p1)])
    run_ok(["predict", *DOC_PATHS, "--model", str(m2), "--out", str(p2)])
    assert p1.read_bytes() == p2.read_bytes()
    rows = read_csv(p1)
    assert rows[0] == ["task_id"] + [f"rank_{i}" for i in range(1, 9)]
    assert len(rows) == 13


def test_train_refuses_mismatched_task_sets(tmp_path, features_csv, capsys):
    trimmed = tmp_path / "trimmed.csv"
    rows = read_csv(features_csv)
    dropped = rows[1][0]
    with open(trimmed, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows([rows[0]] + rows[2:])
    code = run(["train", "--features", str(trimmed), "--results", RESULTS,
                "--out", str(tmp_path / "m.json")])
    assert code == 2
    err = capsys.readouterr().err
    assert dropped in err and "differ" in err


def test_predict_fixture_model_rankings(tmp_path):
    out = tmp_path / "rankings.csv"
    run_ok(["predict", *DOC_PATHS, "--model", MODEL, "--out", str(out)])
    rows = read_csv(out)
    by_task = {r[0]: r[1:] for r in rows[1:]}
    for tid, ranking in by_task.items():
        want = (expected.MODEL_RIGHT_RANKING
                if tid in expected.RIGHT_LEAF_TASKS
                else expected.MODEL_LEFT_RANKING)
        assert ranking == want


def test_predict_bad_model_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert run(["predict", DOC_PATHS[0], "--model", str(bad)]) == 2
    assert "format_version" in capsys.readouterr().err


# --- prove ---

def test_prove_replay_matches_frozen_traces(tmp_path):
    out = tmp_path / "prove.csv"
    run_ok(["prove", *DOC_PATHS, "--model", MODEL,
            "--backend", f"replay:{RESULTS}", "--out", str(out)])
    rows = read_csv(out)
    assert rows[0] == ["task_id", "answer", "time_s", "calls"]
    assert len(rows) == 13
    for tid, answer, time_s, calls in rows[1:]:
        want_answer, want_time, want_calls = expected.EXPECTED_TRACES[tid]
        assert answer == want_answer
        assert float(time_s) == want_time
        assert calls.split(";") == want_calls


def test_prove_reproducible_across_jobs(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["prove", *DOC_PATHS, "--model", MODEL,
            "--backend", f"replay:{RESULTS}"]
    run_ok(base + ["--jobs", "1", "--out", str(a)])
    run_ok(base + ["--jobs", "4", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_prove_threshold_pre_solver_only(tmp_path):
    out = tmp_path / "prove.csv"
    run_ok(["prove", *DOC_PATHS, "--model", MODEL,
            "--backend", f"replay:{RESULTS}",
            "--threshold=-1e30", "--out", str(out)])
    for _, answer, time_s, calls in read_csv(out)[1:]:
        assert calls == "castor-0.9"


def test_prove_json_format(tmp_path):
    out = tmp_path / "prove.json"
    run_ok(["prove", DOC_PATHS[3], "--model", MODEL,
            "--backend", f"replay:{RESULTS}", "--format", "json",
            "--out", str(out)])
    payload = json.loads(out.read_text())
    assert payload[0]["answer"] == "valid"
    assert payload[0]["calls"] == ["castor-0.9"]


def test_prove_static_ranking_override(tmp_path):
    out = tmp_path / "prove.csv"
    ranking = ",".join(reversed(expected.STATIC_RANKING))
    run_ok(["prove", DOC_PATHS[3], "--model", MODEL,
            "--backend", f"replay:{RESULTS}",
            "--static-ranking", ranking, "--out", str(out)])
    rows = read_csv(out)
    # pre-solver is now the count-worst solver, which still proves g_true
    assert rows[1][3] == "glaucus-0.5"


def test_prove_unknown_backend_is_usage_error(capsys):
    assert run(["prove", DOC_PATHS[0], "--model", MODEL,
                "--backend", "carrier-pigeon"]) == 1
    assert "backend" in capsys.readouterr().err


def test_prove_process_backend_via_env(tmp_path, monkeypatch):
    config = tmp_path / "solvers.ini"
    sections = []
    for key in expected.ROSTER:
        name, _, version = key.rpartition("-")
        sections.append(f"[{key}]\nname = {name}\nversion = {version}\n"
                        f"command = /bin/echo sat\n"
                        f"valid_pattern = sat\n")
    config.write_text("\n".join(sections))
    monkeypatch.setenv("PORTFOLIO_CONFIG", str(config))
    out = tmp_path / "prove.csv"
    run_ok(["prove", DOC_PATHS[3], "--model", MODEL, "--backend", "process:",
            "--static-ranking", ",".join(expected.STATIC_RANKING),
            "--out", str(out)])
    rows = read_csv(out)
    assert rows[1][1] == "valid"
    assert rows[1][3] == "castor-0.9"  # pre-solver answered


# --- eval ---

def test_eval_reports(tmp_path, features_csv):
    out_dir = tmp_path / "reports"
    run_ok(["eval", "--results", RESULTS, "--features", features_csv,
            "--model", MODEL, "--out-dir", str(out_dir),
            "--sweep=-1000,4,1000"])
    rows = read_csv(out_dir / "strategy_report.csv")
    assert rows[0] == ["strategy", "mean_time_s", "mean_time_conclusive_s",
                       "ndcg", "r2", "mae", "reg_error"]
    by_name = {r[0]: r for r in rows[1:]}
    assert set(by_name) == {"best", "random", "worst", "learned"}
    assert by_name["best"][3] == "1.0000"
    assert by_name["best"][5] == "0.0000"
    assert by_name["worst"][3] == "0.0000"
    assert by_name["worst"][5] == "4.0000"
    assert by_name["random"][5] == "2.6250"
    assert by_name["best"][4] == ""  # no r2 for ranking-only strategies
    assert by_name["learned"][4] != ""
    assert float(by_name["best"][1]) <= float(by_name["learned"][1]) \
        <= float(by_name["worst"][1])

    level_rows = read_csv(out_dir / "level_report.csv")
    names = {r[0] for r in level_rows[1:]}
    assert {"best", "random", "worst", "learned", "choose_single"} <= names
    assert set(expected.ROSTER) <= names
    by_key = {(r[0], r[1]): r for r in level_rows[1:]}
    assert by_key[("choose_single", "goal")][2] == "10"
    assert by_key[("best", "goal")][2] == "10"
    # hierarchy consistency for every strategy
    for name in names:
        file_p = int(by_key[(name, "file")][2])
        theory_p = int(by_key[(name, "theory")][2])
        goal_p = int(by_key[(name, "goal")][2])
        assert file_p <= theory_p <= goal_p

    for strategy in ("best", "random", "worst", "learned"):
        curve = read_csv(out_dir / f"curve_{strategy}.csv")
        assert curve[0] == ["time_s", "cumulative_conclusive"]
        counts = [int(r[1]) for r in curve[1:]]
        assert counts == sorted(counts)
        assert counts[-1] == 10

    sweep = read_csv(out_dir / "sweep_report.csv")
    assert sweep[0] == ["threshold", "proved", "mean_time_s"]
    # below every predicted cost: pre-solver only, which still proves the
    # two goals castor answers within the 1s pre-solve budget
    assert sweep[1][1] == "2"
    by_threshold = {float(r[0]): r for r in sweep[1:]}
    assert by_threshold[1000.0][1] == "10"
    assert float(sweep[1][2]) < float(by_threshold[1000.0][2])


def test_eval_without_features_skips_learned(tmp_path):
    out_dir = tmp_path / "reports"
    run_ok(["eval", "--results", RESULTS, "--model", MODEL,
            "--folds", "4", "--seed", "7", "--out-dir", str(out_dir)])
    rows = read_csv(out_dir / "strategy_report.csv")
    assert {r[0] for r in rows[1:]} == {"best", "random", "worst"}


def test_eval_cv_learned_row(tmp_path, features_csv):
    out_dir = tmp_path / "reports"
    run_ok(["eval", "--results", RESULTS, "--features", features_csv,
            "--cv", "--folds", "4", "--seed", "7", "--trees", "8",
            "--out-dir", str(out_dir)])
    rows = read_csv(out_dir / "strategy_report.csv")
    by_name = {r[0]: r for r in rows[1:]}
    assert "learned" in by_name
    assert by_name["learned"][4] != ""


def test_eval_sweep_without_model_is_usage_error(tmp_path, features_csv,
                                                 capsys):
    assert run(["eval", "--results", RESULTS, "--features", features_csv,
                "--sweep", "1,2", "--out-dir", str(tmp_path / "r")]) == 1
    assert "--model" in capsys.readouterr().err


# --- calibrate ---

def make_60s_table(tmp_path):
    rows = ["file,theory,goal,solver,answer,time_s"]
    times = [0.5 * i for i in range(1, 101)]  # 0.5 .. 50.0
    for i, t in enumerate(times):
        rows.append(f"f{i % 7},t,g{i},slow-1,valid,{t}")
        rows.append(f"f{i % 7},t,g{i},fast-1,valid,{t / 10}")
    path = tmp_path / "sixty.csv"
    path.write_text("\n".join(rows) + "\n")
    return path


def test_calibrate_cli(tmp_path):
    path = make_60s_table(tmp_path)
    out = tmp_path / "thresholds.csv"
    run_ok(["calibrate", "--results", str(path), "--coverage", "0.99",
            "--recording-timeout", "60", "--out", str(out)])
    rows = read_csv(out)
    assert rows[0] == ["solver", "threshold_s"]
    values = {r[0]: float(r[1]) for r in rows[1:]}
    assert values["slow-1"] == 49.5  # 99th of 100 ascending half-steps
    assert values["fast-1"] == 4.95


def test_calibrate_json(tmp_path, capsys):
    path = make_60s_table(tmp_path)
    run_ok(["calibrate", "--results", str(path), "--coverage", "1.0",
            "--format", "json"])
    payload = json.loads(capsys.readouterr().out)
    assert payload["slow-1"] == 50.0


# --- exit codes ---

def test_usage_errors_exit_one(capsys):
    assert run([]) == 1
    assert run(["train"]) == 1  # missing required flags
    assert run(["no-such-command"]) == 1
    capsys.readouterr()


def test_data_errors_exit_two(tmp_path, capsys):
    missing = str(tmp_path / "absent.csv")
    assert run(["calibrate", "--results", missing]) == 2
    assert "absent.csv" in capsys.readouterr().err
