from __future__ import annotations

import json
import subprocess
import sys

import pytest

from elastic_gateway import cli


def run(capsys, *argv):
    rc = cli.main(list(argv))
    return rc, capsys.readouterr()


def test_eval_mock_json(capsys, root, tmp_path):
    traces = tmp_path / "traces.jsonl"
    rc, out = run(capsys, "eval", "--mock", "--dataset", str(root / "fixtures" / "mini20.jsonl"),
                  "--traces", str(traces))
    report = json.loads(out.out)
    assert rc == 0 and report["em"] == 0.8 and report["n"] == 20
    assert report["level_distribution"] == {"L1": 0.25, "L2": 0.35, "L3": 0.2, "L4": 0.2}
    assert len(traces.read_text().splitlines()) == 20


def test_eval_csv(capsys, root, tmp_path):
    out_path = tmp_path / "report.csv"
    rc, _ = run(capsys, "eval", "--mock", "--dataset", str(root / "fixtures" / "mini20.jsonl"),
                "--out", str(out_path))
    header, row = out_path.read_text().splitlines()
    assert rc == 0 and header.startswith("em,avg_latency,avg_words,L1,L2,L3,L4") and row.startswith("0.8,")


def test_missing_dataset_is_usage_error(capsys, tmp_path):
    rc, out = run(capsys, "eval", "--mock", "--dataset", str(tmp_path / "nope.jsonl"))
    assert rc == 2 and out.err.startswith("error:")


def test_unknown_subcommand_exits_nonzero():
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code != 0


def test_route_prints_trace(capsys):
    rc, out = run(capsys, "route", "--mock", "What is the capital of France?")
    trace = json.loads(out.out)
    assert rc == 0 and trace["level"] == "L1" and trace["answer"] == "Paris"


def test_train_sim_is_deterministic(capsys, tmp_path):
    outputs = []
    for name in ("a", "b"):
        curve = tmp_path / f"{name}.csv"
        rc, out = run(capsys, "train-sim", "--iterations", "20", "--seed", "3", "--out", str(curve))
        assert rc == 0
        summary = json.loads(out.out)
        assert abs(sum(summary["level_histogram"]) - 1.0) < 1e-9
        outputs.append((curve.read_text(), summary["minimal_hit_rate"]))
    assert outputs[0] == outputs[1]


def test_cotool_demo(capsys):
    rc, out = run(capsys, "cotool-demo")
    states = json.loads(out.out)
    assert rc == 0 and states and all(s["status"] == "Finished" for s in states)
    assert any(s["tool_calls"] > 0 for s in states)


def test_module_entry_point(root):
    proc = subprocess.run([sys.executable, "-m", "elastic_gateway.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "train-sim" in proc.stdout
