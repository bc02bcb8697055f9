import json
import subprocess
import sys

import pytest

from abstract_forge.cli import Report, RunConfig, main, run_ablation, run_compress, run_trace
from abstract_forge.expr import Corpus
from conftest import OVERVIEW


def run(*argv):
    return main([str(a) for a in argv])


def test_compress_writes_report(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert run("compress", OVERVIEW, "--iterations", 2, "--max-arity", 2, "--output", out) == 0
    data = json.loads(out.read_text())
    assert set(data) >= {"abstractions", "rewritten", "original_cost", "final_cost",
                         "compression_ratio", "stats", "corpus_stats", "wall_time"}
    first = data["abstractions"][0]
    assert set(first) == {"name", "body", "arity", "utility", "num_uses"}
    assert data["compression_ratio"] == pytest.approx(data["original_cost"] / data["final_cost"])
    assert "fn_0" in capsys.readouterr().out


def test_report_round_trip(overview):
    rep = run_compress(RunConfig(iterations=2, quiet=True), overview)
    again = Report.from_json(json.loads(rep.dumps()))
    assert again == rep


def test_iterations_zero(overview):
    rep = run_compress(RunConfig(iterations=0, quiet=True), overview)
    assert rep.abstractions == [] and rep.compression_ratio == 1.0


def test_arity_zero_only(overview):
    rep = run_compress(RunConfig(iterations=3, max_arity=0, quiet=True), overview)
    assert rep.abstractions and all(a["arity"] == 0 for a in rep.abstractions)


def test_trace_final_utility_matches_compress(overview, tmp_path):
    tr = run_trace(RunConfig(quiet=True, trace=str(tmp_path / "t.json")), overview)
    rep = run_compress(RunConfig(iterations=1, quiet=True), overview)
    assert tr["points"][-1]["utility"] == rep.abstractions[0]["utility"] == tr["utility"]
    us = [p["utility"] for p in tr["points"]]
    assert all(b > a for a, b in zip(us, us[1:]))
    assert json.loads((tmp_path / "t.json").read_text()) == tr


def test_ablation_table(overview):
    tab = run_ablation(RunConfig(quiet=True), overview)["rows"]
    assert list(tab) == ["baseline", "no-arg-capture", "no-upper-bound", "no-redundant-args", "no-opt"]
    assert tab["baseline"]["ratio"] == 1.0
    assert all(r["ratio"] >= 1.0 for r in tab.values())


def test_ablation_budget_is_per_cell(overview):
    tab = run_ablation(RunConfig(quiet=True, node_budget=5), overview)["rows"]
    assert not tab["baseline"]["finished"] and tab["baseline"]["nodes"] <= 5


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('["(f a"]')
    assert run("compress", bad) == 1
    assert "missing ')'" in capsys.readouterr().err
    bad.write_text("{not json")
    assert run("compress", bad) == 1
    assert run("compress", tmp_path / "missing.json") == 1


def test_invalid_config_exit_code(capsys):
    assert run("compress", OVERVIEW, "--iterations", -1) == 2
    assert run("compress", OVERVIEW, "--threads", 0) == 2
    assert run("compress", OVERVIEW, "--max-arity", -2) == 2
    assert "invalid configuration" in capsys.readouterr().err


def test_bad_flag_is_usage_error():
    with pytest.raises(SystemExit) as e:
        run("compress", OVERVIEW, "--utility", "product")
    assert e.value.code == 2


def test_threads_from_env(monkeypatch, tmp_path):
    monkeypatch.setenv("ABSTRACT_FORGE_THREADS", "3")
    out = tmp_path / "r.json"
    assert run("compress", OVERVIEW, "--quiet", "--output", out) == 0
    assert json.loads(out.read_text())["config"]["workers"] == 3
    monkeypatch.setenv("ABSTRACT_FORGE_THREADS", "many")
    assert run("compress", OVERVIEW, "--quiet") == 2


def test_threads_give_same_library(overview):
    a = run_compress(RunConfig(iterations=3, quiet=True), overview)
    b = run_compress(RunConfig(iterations=3, workers=4, quiet=True), Corpus.load(OVERVIEW))
    assert a.abstractions == b.abstractions and a.compression_ratio == b.compression_ratio


def test_quiet_prints_nothing(capsys):
    assert run("compress", OVERVIEW, "--quiet") == 0
    assert capsys.readouterr().out == ""


def test_generate_and_compress(tmp_path):
    path = tmp_path / "c.json"
    assert run("generate", path, "--preset", "shapes-tasks") == 0
    c = Corpus.load(path)
    assert len(c) == 24 and c.programs[0].task == c.programs[1].task
    assert run("compress", path, "--iterations", 2, "--quiet", "--utility", "min-task") == 0


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "abstract_forge.cli", "compress", str(OVERVIEW),
                           "--iterations", "1"], capture_output=True, text=True)
    assert proc.returncode == 0 and "compression ratio" in proc.stdout
