import json
import logging

import pandas as pd
import pytest

from config import config, load_config
from errors import ConfigError
from main import main

SIM = {
    "wsis": 20,
    "patches_per_wsi": [40, 80],
    "source_wsis": 10,
    "source_patches_per_wsi": [40, 60],
}
PIPELINE_KNOBS = ["--dim", "6", "--k", "6", "--restarts", "2", "--n", "2", "--seed", "3"]


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("sim")
    sim_config = root / "sim.json"
    sim_config.write_text(json.dumps(SIM), encoding="utf-8")
    assert main(["simulate", "--config", str(sim_config), "--seed", "7", "--out", str(root)]) == 0
    return root


@pytest.fixture(scope="module")
def run_dir(sim_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    argv = ["pipeline", "--input", str(sim_dir / "target.csv"), "--out", str(out)] + PIPELINE_KNOBS
    assert main(argv) == 0
    return out


def _files(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.is_file()}


def test_simulate_writes_tables_and_truth(sim_dir):
    for name in ("source.csv", "target.csv", "truth.json", "sim_config.json"):
        assert (sim_dir / name).is_file()
    written = json.loads((sim_dir / "sim_config.json").read_text(encoding="utf-8"))
    assert written["seed"] == 7 and written["wsis"] == 20


def test_pipeline_selects_one_group(run_dir):
    selection = json.loads((run_dir / "selection.json").read_text(encoding="utf-8"))
    ranking = [json.loads(line) for line in (run_dir / "ranking.ndjson").read_text(encoding="utf-8").splitlines()]
    assert selection["group_id"] == ranking[0]["group_id"]
    assert ranking[0]["rank"] == 1 and ranking[0]["slice"] == "high"
    manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["knobs"]["k"] == 6 and manifest["knobs"]["seed"] == 3
    assert "selection.json" in manifest["outputs"]


def test_pipeline_is_byte_identical_across_runs(sim_dir, run_dir, tmp_path):
    again = tmp_path / "again"
    argv = ["pipeline", "--input", str(sim_dir / "target.csv"), "--out", str(again)] + PIPELINE_KNOBS
    assert main(argv) == 0
    assert _files(again) == _files(run_dir)


def test_replaying_a_manifest(run_dir, tmp_path):
    replay = tmp_path / "replay"
    assert main(["pipeline", "--manifest", str(run_dir / "manifest.json"), "--out", str(replay)]) == 0
    assert _files(replay) == _files(run_dir)


def test_subcommands_compose_to_the_pipeline(sim_dir, run_dir, tmp_path):
    out = str(tmp_path)
    reduced = str(tmp_path / "reduced_target.csv")
    steps = [
        ["reduce", "--input", str(sim_dir / "target.csv"), "--dim", "6"],
        ["cluster", "--input", reduced, "--k", "6", "--restarts", "2", "--seed", "3"],
        ["entropy", "--input", reduced, "--assignment", str(tmp_path / "assignment.csv"), "--k", "6"],
        ["rank", "--entropy", str(tmp_path / "entropy.ndjson"), "--n", "2"],
        ["select", "--ranking", str(tmp_path / "ranking.ndjson")],
    ]
    for step in steps:
        assert main(step + ["--out", out]) == 0
    for name in ("pca.json", "reduced_target.csv", "kmeans.json", "assignment.csv", "ranking.ndjson", "selection.json"):
        assert (tmp_path / name).read_bytes() == (run_dir / name).read_bytes(), name


def test_missing_input_exits_with_2(tmp_path, caplog):
    missing = tmp_path / "absent.csv"
    with caplog.at_level(logging.ERROR):
        code = main(["validate", "--input", str(missing), "--out", str(tmp_path)])
    assert code == 2
    assert str(missing) in caplog.text
    assert "input:" in caplog.text


def test_usage_errors_exit_with_2():
    assert main(["cluster"]) == 2
    assert main(["no-such-command"]) == 2


def test_pipeline_error_exits_with_1(sim_dir, tmp_path, caplog):
    argv = ["pipeline", "--input", str(sim_dir / "target.csv"), "--dim", "99", "--out", str(tmp_path)]
    with caplog.at_level(logging.ERROR):
        assert main(argv) == 1
    assert "pca:" in caplog.text


def test_undecodable_table_exits_with_1(tmp_path, caplog):
    path = tmp_path / "t.csv"
    path.write_bytes(b"# classes=3\npatch_id,wsi_id,label,f0\na\xff,w1,0,1.0\n")
    with caplog.at_level(logging.ERROR):
        assert main(["validate", "--input", str(path), "--out", str(tmp_path)]) == 1
    assert "dataset: row 3" in caplog.text


def test_config_knobs_are_checked(monkeypatch):
    monkeypatch.setenv("CE_K", "0")
    with pytest.raises(ConfigError, match="K must be >= 1"):
        load_config().validate()
    monkeypatch.setenv("CE_K", "10")
    monkeypatch.setenv("CE_PCA_FIT", "bogus")
    with pytest.raises(ConfigError, match="PCA_FIT"):
        load_config().validate()


def test_invalid_config_exits_with_1(sim_dir, tmp_path, caplog, monkeypatch):
    monkeypatch.setattr(config, "K", 0)
    with caplog.at_level(logging.ERROR):
        assert main(["validate", "--input", str(sim_dir / "target.csv"), "--out", str(tmp_path)]) == 1
    assert "config: K must be >= 1" in caplog.text


def test_rank_logs_the_entropy_table(run_dir, tmp_path, caplog):
    with caplog.at_level(logging.INFO):
        assert main(["rank", "--entropy", str(run_dir / "entropy.ndjson"), "--n", "2", "--out", str(tmp_path)]) == 0
    top = json.loads((tmp_path / "ranking.ndjson").read_text(encoding="utf-8").splitlines()[0])
    assert "entropy ranking (top 4)" in caplog.text
    assert top["group_id"] in caplog.text


def test_validate(sim_dir, tmp_path):
    assert main(["validate", "--input", str(sim_dir / "source.csv"), "--domain", "source", "--out", str(tmp_path)]) == 0


def test_export_plot_data(run_dir, tmp_path):
    argv = [
        "export-plot-data",
        "--input", str(run_dir / "reduced_target.csv"),
        "--assignment", str(run_dir / "assignment.csv"),
        "--ranking", str(run_dir / "ranking.ndjson"),
        "--out", str(tmp_path),
    ]
    assert main(argv) == 0
    ranking = [json.loads(line) for line in (run_dir / "ranking.ndjson").read_text(encoding="utf-8").splitlines()]
    sizes = {row["group_id"]: row["n"] for row in ranking}
    lowest = ranking[-1]["group_id"]

    plot_dir = tmp_path / "plot_data"
    histograms = sorted(plot_dir.glob("*_histogram.csv"))
    assert 1 <= len(histograms) <= 3
    for path in histograms:
        group_id = path.name[: -len("_histogram.csv")]
        histogram = pd.read_csv(path)
        projection = pd.read_csv(plot_dir / f"{group_id}_projection.csv")
        assert histogram["count"].sum() == sizes[group_id]
        assert projection["in_group"].sum() == sizes[group_id]
        assert list(projection.columns) == ["patch_id", "pc1", "pc2", "cluster", "label", "in_group"]

    low = pd.read_csv(plot_dir / f"{lowest}_histogram.csv")
    assert low["proportion"].max() > 0.5


def test_export_unknown_group(run_dir, tmp_path):
    argv = [
        "export-plot-data",
        "--input", str(run_dir / "reduced_target.csv"),
        "--assignment", str(run_dir / "assignment.csv"),
        "--ranking", str(run_dir / "ranking.ndjson"),
        "--groups", "nope",
        "--out", str(tmp_path),
    ]
    assert main(argv) == 1


def test_evaluate_and_report(sim_dir, run_dir, tmp_path):
    argv = [
        "evaluate",
        "--input", str(sim_dir / "target.csv"),
        "--source", str(sim_dir / "source.csv"),
        "--ranking", str(run_dir / "ranking.ndjson"),
        "--seeds", "2",
        "--epochs", "2",
        "--out", str(tmp_path),
    ]
    assert main(argv) == 0
    summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    assert len(summary["conditions"]["high"]["per_seed"]["mIoU"]) == 2

    assert main(["report", "--summary", str(tmp_path / "summary.json"), "--out", str(tmp_path)]) == 0
    report = pd.read_csv(tmp_path / "report.csv")
    assert report["condition"].tolist() == ["s_to_t", "high", "med", "low", "t_to_t"]
    assert (tmp_path / "significance.csv").is_file()
