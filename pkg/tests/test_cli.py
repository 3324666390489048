import json

import numpy as np
import pytest

from innkf import simio
from innkf.cli import main

REPORT_KEYS = {"schema", "schema_version", "dataset", "seed", "n_ticks", "duration_s", "alignment", "estimators"}
METRIC_KEYS = {"ATE_R_rad", "ATE_v_mps", "ATE_p_m", "RE_time", "RE_distance"}


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["simulate", "--seed", "5", "--duration", "3", "--out", str(d / "a.jsonl")]) == 0
    assert main(["simulate", "--seed", "6", "--duration", "3", "--out", str(d / "b.jsonl")]) == 0
    return d


def test_simulate_is_deterministic(work, tmp_path):
    assert main(["simulate", "--seed", "5", "--duration", "3", "--out", str(tmp_path / "a.jsonl")]) == 0
    assert (tmp_path / "a.jsonl").read_bytes() == (work / "a.jsonl").read_bytes()
    header = simio.read_header(work / "a.jsonl")
    assert header["seed"] == 5 and header["n_records"] == 1500


def test_estimate_without_model(work, capsys):
    out = work / "est"
    assert main(["estimate", "--dataset", str(work / "a.jsonl"), "--out-dir", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert set(report) == REPORT_KEYS
    assert report["schema"] == "innkf-run-report" and report["schema_version"] == 1
    assert report["dataset"] == "a.jsonl" and report["seed"] == 5 and report["n_ticks"] == 1500
    assert list(report["estimators"]) == ["raw"]
    assert set(report["estimators"]["raw"]) == METRIC_KEYS
    assert not (out / "compensated.csv").exists()
    assert {"raw.csv", "runtime.json", "errors_raw.csv"} <= {p.name for p in out.iterdir()}
    assert "raw" in capsys.readouterr().out


def test_train_and_estimate_with_model(work):
    args = ["train", "--dataset", str(work / "a.jsonl"), str(work / "b.jsonl"),
            "--seed", "1", "--preset", "tiny", "--epochs", "1", "--stride", "10"]
    assert main(args + ["--out", str(work / "m1.bin")]) == 0
    assert main(args + ["--out", str(work / "m2.bin")]) == 0
    assert (work / "m1.bin").read_bytes() == (work / "m2.bin").read_bytes()
    assert (work / "m1.bin.losses.csv").exists()

    runs = []
    for name in ("e1", "e2"):
        assert main(["estimate", "--dataset", str(work / "b.jsonl"), "--model", str(work / "m1.bin"),
                     "--out-dir", str(work / name)]) == 0
        runs.append((work / name / "report.json").read_bytes())
    assert runs[0] == runs[1]
    report = json.loads(runs[0])
    assert list(report["estimators"]) == ["compensated", "raw"]


def test_evaluate_matches_report(work, capsys):
    out = work / "est_eval"
    assert main(["estimate", "--dataset", str(work / "a.jsonl"), "--out-dir", str(out)]) == 0
    capsys.readouterr()
    assert main(["evaluate", "--estimate", str(out / "raw.csv"), "--truth", str(work / "a.jsonl"),
                 "--window", "1", "--distance", "0.3", "--report", str(out / "eval.json")]) == 0
    printed = json.loads(capsys.readouterr().out)
    report = json.loads((out / "report.json").read_text())["estimators"]["raw"]
    assert printed["ATE"]["ATE_p_m"] == pytest.approx(report["ATE_p_m"], rel=1e-12)
    assert printed["RE_time"]["n_windows"] > 0
    assert json.loads((out / "eval.json").read_text()) == printed


def test_bench_output(capsys, tmp_path):
    assert main(["bench", "--sizes", "8", "16", "--repeats", "100", "--csv", str(tmp_path / "b.csv")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3 and lines[0].split()[0] == "batch"
    rows = np.loadtxt(tmp_path / "b.csv", delimiter=",", skiprows=1)
    assert rows.shape == (2, 4) and np.all(rows[:, 3] > 0)


def test_exit_code_config(tmp_path, work):
    assert main(["simulate", "--seed", "1", "--duration", "-1", "--out", str(tmp_path / "x.jsonl")]) == 2
    assert main(["bench", "--sizes", "0"]) == 2
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[filter]\ncontact_source = guess\n")
    assert main(["estimate", "--dataset", str(work / "a.jsonl"), "--config", str(cfg),
                 "--out-dir", str(tmp_path / "o")]) == 2


def test_exit_code_data(tmp_path, work):
    assert main(["estimate", "--dataset", str(tmp_path / "missing.jsonl"), "--out-dir", str(tmp_path / "o")]) == 3
    text = (work / "a.jsonl").read_text()
    (tmp_path / "cut.jsonl").write_text(text[: len(text) // 2])
    assert main(["estimate", "--dataset", str(tmp_path / "cut.jsonl"), "--out-dir", str(tmp_path / "o")]) == 3
    (tmp_path / "junk.jsonl").write_text("hello\n")
    assert main(["estimate", "--dataset", str(tmp_path / "junk.jsonl"), "--out-dir", str(tmp_path / "o")]) == 3


def test_exit_code_numerical(tmp_path, work, capsys):
    lines = (work / "a.jsonl").read_text().splitlines(True)
    rec = json.loads(lines[11])
    rec["accel_meas"] = [1e200, 0.0, 0.0]
    lines[11] = json.dumps(rec) + "\n"
    (tmp_path / "bad.jsonl").write_text("".join(lines))
    assert main(["estimate", "--dataset", str(tmp_path / "bad.jsonl"), "--out-dir", str(tmp_path / "o")]) == 4
    assert "diverged" in capsys.readouterr().err
