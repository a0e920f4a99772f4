import csv
import io
import json
import subprocess
import sys

import pytest

from eyecontact.cli import main
from eyecontact.pipeline import CATEGORIES


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = d / "gen.json"
    cfg.write_text(json.dumps({"n_persons": 3, "frames_per_person": 80}))
    out = d / "data.ndjson"
    assert main(["generate", "--config", str(cfg), "--out", str(out), "--seed", "1"]) == 0
    return out


def _csv_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_run_within_three_persons(dataset, tmp_path, capsys):
    out = tmp_path / "r"
    rc = main(["run-within", "--dataset", str(dataset), "--labels", "gt", "--by", "none",
               "--out", str(out), "--seed", "0"])
    assert rc == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["n_folds"] == 3
    assert len(rep["cells"][0]["folds"]) == 3
    assert [f["test_person"] for f in rep["cells"][0]["folds"]] == ["P00", "P01", "P02"]
    rows = _csv_rows((out / "report.csv").read_text())
    assert list(rows[0]) == ["breakdown_id", "n_train", "n_test", "n_excluded", "mcc", "mean", "sd", "reason"]


def test_by_headpose_gives_25_cells(dataset, tmp_path):
    out = tmp_path / "r"
    assert main(["run-within", "--dataset", str(dataset), "--labels", "cluster", "--by", "headpose",
                 "--out", str(out), "--seed", "0"]) == 0
    assert len(_csv_rows((out / "report.csv").read_text())) == 25


def test_by_category_gives_named_cells(dataset, tmp_path):
    out = tmp_path / "r"
    assert main(["run-within", "--dataset", str(dataset), "--labels", "gt", "--by", "category",
                 "--out", str(out), "--seed", "0"]) == 0
    names = [r["breakdown_id"] for r in _csv_rows((out / "report.csv").read_text())]
    assert names == [
        "Whole face all landmarks",
        "Whole face some landmarks",
        "Partial face 2 eyes 1 mouth",
        "Partial face 2 eyes no mouth",
        "Partial face 1 eye 1 mouth",
        "Partial face 1 eye no mouth",
        "Partial face no eyes 1 mouth",
        "No face",
    ]
    assert names == [c.value for c in CATEGORIES]


def test_run_cross_and_report(dataset, tmp_path, capsys):
    out = tmp_path / "x"
    assert main(["run-cross", "--train", str(dataset), "--test", str(dataset), "--labels", "gt",
                 "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["report", "--in", str(out), "--format", "csv"]) == 0
    text = capsys.readouterr().out
    assert text == (out / "report.csv").read_text()
    assert main(["report", "--in", str(out), "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["experiment"] == "cross"


def test_unknown_flag_is_usage_error(capsys):
    assert main(["run-within", "--bogus"]) == 1
    err = capsys.readouterr().err
    assert "usage:" in err


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["generate", "--out", "x"],
                                  ["report", "--in", "x", "--format", "xml"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == 1
    assert "usage:" in capsys.readouterr().err


def test_data_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.ndjson"
    bad.write_text("{not json\n")
    assert main(["run-within", "--dataset", str(bad), "--labels", "gt", "--out", str(tmp_path / "o"),
                 "--seed", "0"]) == 2
    assert "line 1" in capsys.readouterr().err
    assert main(["run-within", "--dataset", str(tmp_path / "missing"), "--labels", "gt",
                 "--out", str(tmp_path / "o"), "--seed", "0"]) == 2
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"p_contact": 2.0}))
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "d"), "--seed", "0"]) == 2


def test_single_person_dataset_is_data_error(tmp_path):
    one = tmp_path / "one.ndjson"
    assert main(["generate", "--config", _write(tmp_path / "c.json", {"n_persons": 1, "frames_per_person": 5}),
                 "--out", str(one), "--seed", "0"]) == 0
    assert main(["run-within", "--dataset", str(one), "--labels", "gt", "--out", str(tmp_path / "o"),
                 "--seed", "0"]) == 2


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "eyecontact.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "run-within" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "eyecontact.cli", "run-within"], capture_output=True, text=True)
    assert proc.returncode == 1 and "usage:" in proc.stderr
