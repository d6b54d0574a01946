import hashlib
import json
import shutil
import subprocess
import sys

import pytest

from srsmine.cli import main
from srsmine.statemodel import load_model_file
from srsmine.suite import coverage, read_suite, write_suite


def run(*argv):
    return main([str(a) for a in argv])


def snapshot(directory):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(directory.rglob("*")) if p.is_file()}


def test_generate_two_state(tmp_path, samples, capsys):
    out = tmp_path / "suite.json"
    assert run("generate", samples / "two_state.json", "--out", out) == 0
    machine = load_model_file(samples / "two_state.json")
    suite = read_suite(out)
    assert len(suite) == 2
    report = coverage(suite, machine)
    assert (report.pairs_covered, report.pairs_total) == (2, 2)
    assert "predicate outcomes" in capsys.readouterr().out


def test_generate_structured_output(tmp_path, samples, capsys):
    assert run("generate", samples / "two_state.json", "--out", tmp_path / "s.json", "--format", "structured") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["coverage"]["predicate_outcomes"] == {"covered": 2, "total": 2}
    assert doc["failed_targets"] == []


def test_generate_infeasible_exits_2_and_writes(tmp_path, samples, capsys):
    out = tmp_path / "suite.json"
    assert run("generate", samples / "infeasible.json", "--out", out) == 2
    doc = json.loads(out.read_text())
    assert doc["failed_targets"]
    assert "FAILED" in capsys.readouterr().out


def test_reduce_duplicated_suite_with_one_cluster(tmp_path, samples):
    machine = load_model_file(samples / "two_state.json")
    run("generate", samples / "two_state.json", "--out", tmp_path / "s.json")
    suite = read_suite(tmp_path / "s.json")
    twins = [c.__class__(**{**c.__dict__, "id": c.id + "b"}) for c in suite.cases]
    dup = suite.with_cases(list(suite.cases) + twins)
    write_suite(dup, tmp_path / "dup.json")
    assert run("reduce", tmp_path / "dup.json", samples / "two_state.json", "--clusters", "1",
               "--out", tmp_path / "r.json") == 0
    reduced = read_suite(tmp_path / "r.json")
    assert len(reduced) < len(dup)
    assert coverage(reduced, machine) == coverage(dup, machine)


def test_reduce_no_repair_reports_loss(tmp_path, samples, capsys):
    run("generate", samples / "atm.json", "--out", tmp_path / "s.json")
    capsys.readouterr()
    assert run("reduce", tmp_path / "s.json", samples / "atm.json", "--clusters", "1", "--no-repair",
               "--out", tmp_path / "r.json") == 0
    assert "coverage lost without repair" in capsys.readouterr().out


def test_reduce_against_other_model_fails(tmp_path, samples, capsys):
    run("generate", samples / "two_state.json", "--out", tmp_path / "s.json")
    assert run("reduce", tmp_path / "s.json", samples / "atm.json", "--out", tmp_path / "r.json") == 1
    assert "digest" in capsys.readouterr().err


def test_invalid_model_exit_1_names_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"name": "m", "states": ["A"], "initial": "A", "variables": [],
                               "transitions": [{"id": "t", "source": "A", "target": "Q"}]}))
    assert run("generate", bad, "--out", tmp_path / "s.json") == 1
    err = capsys.readouterr().err
    assert "bad.json" in err and "transitions[0]" in err
    assert not (tmp_path / "s.json").exists()


@pytest.mark.parametrize("argv", [
    ["generate"],
    ["reduce", "a.json"],
    ["generate", "m.json", "--max-depth", "0"],
    ["reduce", "s.json", "m.json", "--clusters", "zero"],
    ["bogus"],
])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1


def test_missing_file_exit_1(tmp_path, capsys):
    assert run("generate", tmp_path / "nope.json", "--out", tmp_path / "s.json") == 1
    assert "nope.json" in capsys.readouterr().err


def test_initial_flag(tmp_path, samples):
    assert run("generate", samples / "two_state.json", "--initial", "x=57", "--out", tmp_path / "s.json") == 0
    assert run("generate", samples / "two_state.json", "--initial", "y=1", "--out", tmp_path / "t.json") == 1


def test_classify_report(tmp_path, samples, capsys):
    assert run("classify", "--train", samples / "train.tsv", "--input", samples / "srs.tsv",
               "--out", tmp_path / "labels.tsv") == 0
    text = capsys.readouterr().out
    assert text.startswith("Total 6 sentences")
    assert "IF sentence contains" in text
    assert len((tmp_path / "labels.tsv").read_text().splitlines()) == 6


def test_reruns_byte_identical_and_inputs_untouched(tmp_path, samples):
    inputs = tmp_path / "in"
    shutil.copytree(samples, inputs)
    before = snapshot(inputs)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = run("pipeline", "--train", inputs / "train.tsv", "--srs", inputs / "srs.tsv",
                   "--model", inputs / "atm.json", "--out", out, "--seed", 5, "--with-figures")
        assert code == 0
        outs.append(snapshot(out))
    assert outs[0] == outs[1]
    assert set(outs[0]) >= {"classified.tsv", "suite.json", "reduced.json", "coverage.png", "reduction.png"}
    assert snapshot(inputs) == before


def test_pipeline_propagates_failed_targets(tmp_path, samples):
    code = run("pipeline", "--train", samples / "train.tsv", "--srs", samples / "srs.tsv",
               "--model", samples / "infeasible.json", "--out", tmp_path / "o")
    assert code == 2
    assert (tmp_path / "o" / "reduced.json").exists()


def test_parallel_generation_matches_serial(tmp_path, samples):
    run("generate", samples / "atm.json", "--out", tmp_path / "a.json")
    run("generate", samples / "atm.json", "--out", tmp_path / "b.json", "--jobs", 2)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_console_script(tmp_path, samples):
    proc = subprocess.run(
        [sys.executable, "-m", "srsmine.cli", "generate", str(samples / "infeasible.json"), "--out", str(tmp_path / "s.json")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 2
