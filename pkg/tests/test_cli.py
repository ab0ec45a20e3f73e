import json
import os

import pytest

from medguard.cli import EXIT_DATA, EXIT_DETECTOR, EXIT_OK, EXIT_USAGE, RunConfig, UsageError, main
from medguard.ingest import read_attack_csv, read_device_csv


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_generate_both_counts(tmp_path, capsys):
    code, out, _ = run(["generate", "--both", "--seed", 3, "--n-records", 1000, "--out", tmp_path], capsys)
    assert code == EXIT_OK
    dev, _ = read_device_csv(tmp_path / "device.csv")
    att, _ = read_attack_csv(tmp_path / "attack.csv")
    # device keeps the 20 % default, attack traffic the 10 % default
    assert sum(r.label for r in dev) == 200 and sum(r.label for r in att) == 100
    assert "1000 rows, 200 labeled 1" in out


def test_generate_is_byte_identical(tmp_path, capsys):
    for d in ("a", "b"):
        run(["generate", "--task", "cyber", "--seed", 8, "--n-records", 500, "--out", tmp_path / d], capsys)
    assert (tmp_path / "a/attack.csv").read_bytes() == (tmp_path / "b/attack.csv").read_bytes()


def test_select_outputs_and_determinism(tmp_path, capsys):
    args = ["select", "--task", "device", "--seed", 2, "--n-records", 3000]
    run(args + ["--out", tmp_path / "a"], capsys)
    code, _, _ = run(args + ["--out", tmp_path / "b"], capsys)
    assert code == EXIT_OK
    for name in ("feature_scores.csv", "selected_features.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header = (tmp_path / "a/feature_scores.csv").read_text().splitlines()[0]
    assert header == "feature,method,score,selected"
    features = {line.split(",")[0] for line in (tmp_path / "a/feature_scores.csv").read_text().splitlines()[1:]}
    chosen = (tmp_path / "a/selected_features.txt").read_text().split()
    assert chosen and set(chosen) <= features


def test_select_finds_perturbed_vitals(tmp_path, capsys):
    # benchmark-scale data; at a few thousand rows the 4th-ranked Temperature drops out more often
    hits = 0
    for seed in range(10):
        out = tmp_path / str(seed)
        run(["select", "--task", "device", "--seed", seed, "--n-records", 20_000, "--out", out], capsys)
        chosen = set((out / "selected_features.txt").read_text().split())
        hits += {"Temperature", "Heart_Rate"} <= chosen
    assert hits >= 9


def test_bench_models_filter_and_report(tmp_path, capsys):
    code, out, _ = run(["bench", "--task", "device", "--seed", 0, "--n-records", 1500, "--models", "gbdt,knn",
                        "--repeats", 1, "--out", tmp_path, "--save-models"], capsys)
    assert code == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())
    ran = [r["model"] for r in rep["rows"] if r["status"] != "not implemented"]
    assert ran == ["GBDT", "KNN"]
    assert rep["config"]["run"]["models"] == ["gbdt", "knn"]
    assert "output_dir" not in rep["config"]["run"]
    assert (tmp_path / "model_gbdt.json").is_file() and (tmp_path / "model_knn.json").is_file()
    assert "GBDT" in out


def test_outputs_stay_in_output_dir(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, _, _ = run(["bench", "--task", "cyber", "--seed", 1, "--n-records", 800, "--models", "knn",
                      "--repeats", 1, "--out", "results"], capsys)
    assert code == EXIT_OK
    assert os.listdir(tmp_path) == ["results"]


def test_report_rerenders(tmp_path, capsys):
    run(["bench", "--task", "device", "--seed", 0, "--n-records", 1000, "--models", "knn", "--repeats", 1,
         "--out", tmp_path], capsys)
    code, out, _ = run(["report", tmp_path / "report.json", "--out", tmp_path / "again"], capsys)
    assert code == EXIT_OK
    assert (tmp_path / "again/report.csv").read_bytes() == (tmp_path / "report.csv").read_bytes()
    assert (tmp_path / "again/report_f1_vs_cost.svg").is_file()


def test_missing_input_names_path(tmp_path, capsys):
    missing = tmp_path / "absent.csv"
    code, _, err = run(["bench", "--task", "device", "--seed", 0, "--input", missing, "--out", tmp_path], capsys)
    assert code == EXIT_DATA and str(missing) in err


def test_usage_errors(tmp_path, capsys):
    assert run(["bench", "--task", "device", "--out", tmp_path], capsys)[0] == EXIT_USAGE   # no seed
    assert run(["bench", "--task", "weather", "--seed", 1], capsys)[0] == EXIT_USAGE
    assert run(["bench", "--task", "device", "--seed", 1, "--models", "gan", "--out", tmp_path],
               capsys)[0] == EXIT_USAGE
    assert run(["frobnicate"], capsys)[0] == EXIT_USAGE


def test_bad_thread_setting(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SHIELD_THREADS", "zero")
    code, _, err = run(["generate", "--task", "device", "--seed", 1, "--n-records", 50, "--out", tmp_path], capsys)
    assert code == EXIT_USAGE and "SHIELD_THREADS" in err


def test_detector_failure_exit_code(tmp_path, capsys):
    cfg = {"task": "device", "seed": 0, "generator": {"n_records": 600}, "models": ["knn"],
           "overrides": {"KNN": {"k": 10_000}}, "repeats": 1, "output_dir": str(tmp_path)}
    (tmp_path / "run.json").write_text(json.dumps(cfg))
    code, _, err = run(["bench", "--config", tmp_path / "run.json"], capsys)
    assert code == EXIT_DETECTOR and "KNN" in err


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = {"task": "cyber", "seed": 4, "generator": {"n_records": 300}, "output_dir": str(tmp_path / "x")}
    (tmp_path / "run.json").write_text(json.dumps(cfg))
    code, _, _ = run(["generate", "--config", tmp_path / "run.json", "--seed", 5, "--out", tmp_path / "y"],
                     capsys)
    assert code == EXIT_OK and (tmp_path / "y/attack.csv").is_file() and not (tmp_path / "x").exists()


def test_run_config_invariants():
    with pytest.raises(UsageError):
        RunConfig(task="device", seed=0)
    with pytest.raises(UsageError):
        RunConfig(task="device", seed=0, input="a.csv", generator={})
    with pytest.raises(UsageError):
        RunConfig.from_dict({"task": "device", "generator": {}})
    with pytest.raises(UsageError):
        RunConfig.from_dict({"task": "device", "seed": 0, "generator": {}, "colour": "red"})
