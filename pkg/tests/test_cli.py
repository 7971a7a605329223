import csv
import json
from pathlib import Path

import pytest

from swarmtrack.cli import main
from swarmtrack.config import ExperimentConfig, save_config

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "cfg.json"
    save_config(ExperimentConfig(runs=2).with_(T=30), p)
    return p


def test_simulate_writes_outputs(cfg_path, tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(cfg_path), "--algo", "EDC-CIF", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert "TR" in summary and summary["runs"] == 2 and len(summary["config_hash"]) == 16
    for name in ("timing.json", "rmse_series.csv", "trigger_raster.csv", "config.json",
                 "runs/run_0000.csv", "runs/run_0001.csv"):
        assert (out / name).exists(), name


def test_simulate_is_deterministic(cfg_path, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["simulate", "--config", str(cfg_path), "--seed", "5", "--out", str(d)]) == 0
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()
    assert (a / "rmse_series.csv").read_bytes() == (b / "rmse_series.csv").read_bytes()


def test_bad_config_path_exits_2(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_invalid_config_exits_2(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"topology": [[0, 1]]}))
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_usage_errors_exit_2(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["simulate", "--algo", "NOPE"])
    assert e.value.code == 2
    assert main(["compare", "--algo", "", "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--runs", "0", "--out", str(tmp_path)]) == 2


def test_compare_delta_sweep(cfg_path, tmp_path):
    out = tmp_path / "cmp"
    rc = main(["compare", "--config", str(cfg_path), "--algo", "EC-CKF,EDC-CIF",
               "--sweep-delta", "0,0.02,0.04,0.08", "--out", str(out)])
    assert rc == 0
    rows = list(csv.DictReader((out / "comparison.csv").open()))
    assert len(rows) == 8 and {r["status"] for r in rows} == {"ok"}
    tr = [float(r["TR"]) for r in rows if r["variant"] == "EDC-CIF"]
    assert tr[0] == 1.0 and all(a >= b for a, b in zip(tr, tr[1:]))
    assert (out / "rmse_series_EDC-CIF_delta_0.04.csv").exists()


def test_compare_rejects_two_sweeps(cfg_path, tmp_path):
    assert main(["compare", "--config", str(cfg_path), "--sweep-delta", "0.1", "--sweep-sigma1", "0.1",
                 "--out", str(tmp_path)]) == 2


def test_compare_nodes_sweep(cfg_path, tmp_path):
    rc = main(["compare", "--config", str(cfg_path), "--algo", "DC-CIF", "--nodes", "3,5", "--runs", "1",
               "--out", str(tmp_path)])
    assert rc == 0
    rows = list(csv.DictReader((tmp_path / "comparison.csv").open()))
    assert [r["value"] for r in rows] == ["3", "5"]


def test_ingest_and_replay(tmp_path):
    bundle = tmp_path / "bundle"
    files = [str(FIXTURES / f"{n}.tum") for n in ("target", "observer_0", "observer_1", "observer_2")]
    assert main(["ingest-tum", *files, "--rate", "10", "--out", str(bundle)]) == 0
    index = json.loads((bundle / "index.json").read_text())
    assert index["n_sensors"] == 3 and index["horizon"] > 100
    out = tmp_path / "rep"
    assert main(["simulate", "--replay", str(bundle), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["replay"] and summary["rmse_pos_mean"] is not None


def test_ingest_bad_file(tmp_path):
    bad = tmp_path / "bad.tum"
    bad.write_text("0 1 2 3\n")
    assert main(["ingest-tum", str(bad), str(bad), "--out", str(tmp_path / "b")]) == 2


def test_metrics_recomputes_summary(cfg_path, tmp_path):
    sim = tmp_path / "sim"
    main(["simulate", "--config", str(cfg_path), "--out", str(sim)])
    out = tmp_path / "m"
    assert main(["metrics", str(sim), "--out", str(out)]) == 0
    a = json.loads((sim / "summary.json").read_text())
    b = json.loads((out / "summary.json").read_text())
    for key in ("TR", "rmse_pos_mean", "rmse_mean", "messages", "config_hash"):
        assert a[key] == b[key], key
    assert main(["metrics", str(tmp_path / "nothing")]) == 2
