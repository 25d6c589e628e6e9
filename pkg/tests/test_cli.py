import json
import subprocess
import sys

import pytest

from llmsocial.cli import config_hash, main

ANALYSES = [
    ["analyze", "graph"],
    ["analyze", "homophily", "--n-random", "5"],
    ["analyze", "influence"],
    ["analyze", "toxicity"],
    ["analyze", "stance"],
    ["analyze", "ideology"],
]


def tree(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--seed", "7", "--out", str(out)]) == 0
    return out


def test_simulate_layout(simulated):
    log = simulated / "raw" / "events.jsonl"
    assert log.exists() and (simulated / "raw" / "events.jsonl.meta.json").exists()
    meta = json.loads((simulated / "raw" / "events.jsonl.meta.json").read_text())
    assert meta["command"] == "simulate" and meta["seed"] == 7
    assert meta["config_hash"] == config_hash(meta["config"])
    rep = json.loads((simulated / "reports" / "simulation.json").read_text())
    assert rep["n_agents"] == 20 and rep["n_events"] > 0


def test_missing_seed_is_usage_error(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path)]) == 1
    assert "seed" in capsys.readouterr().err


def test_bad_usage_exits_one(tmp_path):
    assert main(["analyze", "nonsense", "--out", str(tmp_path)]) == 1
    assert main(["analyze", "graph", "--out", str(tmp_path), "--log", str(tmp_path / "missing.jsonl")]) == 1


def test_unknown_config_key_rejected(tmp_path, simulated):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"analyze": {"graph": {"bogus": 1}}}))
    log = simulated / "raw" / "events.jsonl"
    assert main(["analyze", "graph", "--out", str(tmp_path / "o"), "--log", str(log), "--config", str(cfg)]) == 1


def test_analyze_graph_outputs(tmp_path, simulated):
    log = simulated / "raw" / "events.jsonl"
    assert main(["analyze", "graph", "--seed", "1", "--out", str(tmp_path), "--log", str(log)]) == 0
    for rel in ("figures_data/degree.csv", "figures_data/clustering.csv", "reports/paths.json",
                "reports/reciprocity.json"):
        assert (tmp_path / rel).exists(), rel
        assert (tmp_path / (rel + ".meta.json")).exists(), rel
    paths = json.loads((tmp_path / "reports" / "paths.json").read_text())
    assert "random_baseline" in paths


def test_reruns_are_byte_identical(tmp_path, simulated):
    log = str(simulated / "raw" / "events.jsonl")
    for d in ("a", "b"):
        for cmd in ANALYSES:
            assert main([*cmd, "--seed", "3", "--out", str(tmp_path / d), "--log", log]) == 0, cmd
    assert tree(tmp_path / "a") == tree(tmp_path / "b")


def test_ingest_round_trip(tmp_path, simulated):
    src = simulated / "raw" / "events.jsonl"
    assert main(["ingest", "--input", str(src), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "raw" / "events.jsonl").read_bytes() == src.read_bytes()


def test_ingest_strict_and_lenient(tmp_path, simulated):
    lines = (simulated / "raw" / "events.jsonl").read_text().splitlines()
    extra = json.loads(lines[0])
    extra["payload"]["mood"] = "sunny"
    odd = tmp_path / "odd.jsonl"
    odd.write_text("\n".join([json.dumps(extra)] + lines[1:]) + "\n")
    assert main(["ingest", "--input", str(odd), "--out", str(tmp_path / "s")]) == 1
    assert main(["ingest", "--input", str(odd), "--lenient", "--out", str(tmp_path / "l")]) == 0
    broken = tmp_path / "broken.jsonl"
    broken.write_text("\n".join(lines[:5] + ["{not json"] + lines[5:]) + "\n")
    assert main(["ingest", "--input", str(broken), "--lenient", "--out", str(tmp_path / "b")]) == 1


def test_experiment_predict_and_report(tmp_path, simulated):
    out = str(tmp_path)
    log = str(simulated / "raw" / "events.jsonl")
    assert main(["experiment", "cost", "--seed", "2", "--n", "10", "--log", log, "--out", out]) == 0
    assert main(["predict", "--synthetic", "--seed", "2", "--n-seeds", "2", "--out", out]) == 0
    assert main(["report", "--out", out]) == 0
    summary = json.loads((tmp_path / "reports" / "summary.json").read_text())
    assert {"cost", "prediction"} <= set(summary)
    assert (tmp_path / "reports" / "summary.md").read_text().startswith("# llmsocial report")


def test_report_without_reports_fails(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == 1


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "llmsocial.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "llmsocial" in r.stdout


def test_yaml_simulation_config(tmp_path):
    cfg = tmp_path / "sim.yaml"
    cfg.write_text("simulation:\n  ticks: 5\n  agents:\n    - count: 3\n      policy: scripted\n"
                   "      params:\n        topic_affinities: {chess: 1.0}\n")
    assert main(["simulate", "--seed", "1", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "reports" / "simulation.json").read_text())
    assert rep["n_agents"] == 3
    broken = tmp_path / "bad.yaml"
    broken.write_text("simulation: [unclosed\n")
    assert main(["simulate", "--seed", "1", "--config", str(broken), "--out", str(tmp_path / "x")]) == 1
