import csv
import json
import statistics

import pytest

from hfgat.cli import main
from hfgat.privacy import adaptive_epsilon

TINY = {"n_uavs": 8, "duration": 2.0}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(TINY))
    return p


@pytest.fixture(autouse=True)
def single_worker(monkeypatch):
    monkeypatch.setenv("HFGAT_THREADS", "1")


def test_run_writes_two_files(cfg, tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--seed", "1", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["metrics.csv", "metrics.json"]
    rows = read_csv(out / "metrics.csv")
    assert len(rows) == 1 and rows[0]["seed"] == "1" and rows[0]["schema_version"] == "1"
    assert json.loads((out / "metrics.json").read_text())["labels"]["seed"] == 1


def test_run_byte_identical(cfg, tmp_path):
    for d in ("a", "b"):
        assert main(["run", "--config", str(cfg), "--seed", "5", "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a/metrics.csv").read_bytes() == (tmp_path / "b/metrics.csv").read_bytes()


def test_exit_codes_for_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n_uavs": 1}))
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2
    assert main(["bogus"]) == 2
    assert main(["attack", "--config", str(bad), "--fractions", "0.7", "--out", str(tmp_path / "o")]) == 2


def test_exit_code_for_runtime_failure(tmp_path, monkeypatch):
    import hfgat.cli as cli

    def boom(*a, **k):
        raise RuntimeError("boom")
    monkeypatch.setattr(cli, "run_scenario", boom)
    p = tmp_path / "c.json"
    p.write_text("{}")
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 3


def _sweep(tmp_path, spec):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(spec))
    out = tmp_path / "sw"
    assert main(["sweep", "--spec", str(p), "--out", str(out)]) == 0
    return read_csv(out / "sweep.csv"), read_csv(out / "sweep_summary.csv")


def test_sweep_cardinality_and_summary_means(tmp_path):
    spec = {"axis": "n_uavs", "values": [4, 6, 8], "pipelines": ["disabled", "centralized"],
            "seeds_per_cell": 5, "base": {"duration": 1.0}}
    rows, summary = _sweep(tmp_path, spec)
    assert len(rows) == 30 and len(summary) == 6
    assert all(r["status"] == "ok" for r in rows)
    for s in summary:
        cell = [r for r in rows if r["axis_value"] == s["axis_value"] and r["pipeline"] == s["pipeline"]]
        assert len(cell) == 5 == int(s["runs"])
        for m in ("latency_p95_ms", "messages_total", "collision_rate"):
            vals = [float(r[m]) for r in cell]
            assert float(s[f"{m}_mean"]) == pytest.approx(sum(vals) / len(vals), rel=1e-12)
            assert float(s[f"{m}_std"]) == pytest.approx(statistics.pstdev(vals), rel=1e-9, abs=1e-12)


def test_sweep_one_by_one_equals_run(tmp_path):
    rows, summary = _sweep(tmp_path, {"axis": "n_uavs", "values": [8], "pipelines": ["hfgat"],
                                      "base": {"duration": 2.0}})
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(TINY))
    assert main(["run", "--config", str(cfg), "--seed", "0", "--out", str(tmp_path / "r")]) == 0
    single = read_csv(tmp_path / "r/metrics.csv")[0]
    assert len(rows) == 1 and {k: rows[0][k] for k in single} == single
    assert float(summary[0]["latency_p95_ms_mean"]) == float(single["latency_p95_ms"])
    assert float(summary[0]["latency_p95_ms_std"]) == 0.0


def test_sweep_output_independent_of_workers(tmp_path, monkeypatch):
    spec = {"axis": "n_uavs", "values": [4, 6], "pipelines": ["disabled"], "seeds_per_cell": 2,
            "base": {"duration": 1.0}}
    (tmp_path / "one").mkdir()
    (tmp_path / "three").mkdir()
    a, _ = _sweep(tmp_path / "one", spec)
    monkeypatch.setenv("HFGAT_THREADS", "3")
    b, _ = _sweep(tmp_path / "three", spec)
    assert a == b
    assert (tmp_path / "one/sw/sweep.csv").read_bytes() == (tmp_path / "three/sw/sweep.csv").read_bytes()


def test_invalid_sweep_spec_exit_2(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"axis": "n_uavs", "values": [], "pipelines": ["hfgat"]}))
    assert main(["sweep", "--spec", str(p), "--out", str(tmp_path / "o")]) == 2


def test_attack_grid_flags_tolerance(cfg, tmp_path):
    out = tmp_path / "atk"
    assert main(["attack", "--config", str(cfg), "--fractions", "0,0.4", "--seeds", "1", "--out", str(out)]) == 0
    rows = read_csv(out / "attack.csv")
    assert {(r["axis_value"], r["pipeline"]) for r in rows} == {
        (v, p) for v in ("0.0", "0.4") for p in ("hfgat", "fedavg_variant")}
    for r in rows:
        assert r["tolerance"] == ("beyond" if r["axis_value"] == "0.4" else "within")


def test_privacy_epsilon_cross_check(cfg, tmp_path):
    out = tmp_path / "pv"
    assert main(["privacy", "--config", str(cfg), "--levels", "0,0.5,1", "--seeds", "1", "--out", str(out)]) == 0
    rows = read_csv(out / "privacy.csv")
    assert len(rows) == 9
    for r in rows:
        theta = float(r["threat_pinned"])
        eps = float(r["mean_epsilon"])
        if eps == 0.0:      # no gradient submitted in this short run
            continue
        want = {"adaptive": adaptive_epsilon(theta), "static_low_eps": 0.1, "static_high_eps": 1.0}
        assert eps == pytest.approx(want[r["privacy_policy"]], abs=1e-12)
    assert any(float(r["mean_epsilon"]) > 0 for r in rows)
