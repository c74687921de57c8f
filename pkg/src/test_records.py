import csv

import numpy as np

from records import (LAB_VERSION, RunRecord, convert_numpy_types, read_run_record, version_tag,
                     write_csv_atomic, write_run_record)


def test_failing_gate_becomes_a_finding():
    record = RunRecord(command="derive")
    assert record.add_gate("ok", True, 0.0, 1.0)
    assert not record.add_gate("too_large", np.float64(3.0) < 1.0, 3.0, 1.0)
    assert not record.all_gates_passed
    assert len(record.findings) == 1
    assert "too_large" in record.findings[0]


def test_run_record_round_trip(tmp_path):
    record = RunRecord(command="groundstate", config={"name": "x"})
    record.scalars["m"] = np.float64(1.25)
    record.scalars["shape"] = np.array([2, 3])
    record.add_gate("m_positive", np.bool_(True), np.float64(1.25), 0.0)
    path = write_run_record(record, str(tmp_path / "out"))
    data = read_run_record(path)
    assert data["command"] == "groundstate"
    assert data["scalars"] == {"m": 1.25, "shape": [2, 3]}
    assert data["all_gates_passed"] is True
    assert data["artifacts"]["run_record"] == "run_record.json"
    assert data["wall_time"] >= 0.0


def test_convert_numpy_types():
    converted = convert_numpy_types({1: np.int64(2), "v": (np.float32(0.5), np.bool_(False))})
    assert converted == {"1": 2, "v": [0.5, False]}
    assert type(converted["1"]) is int


def test_csv_floats_are_exact(tmp_path):
    path = tmp_path / "table.csv"
    value = 0.1 + 0.2
    write_csv_atomic(str(path), ("x", "y"), [(value, "label"), (np.float64(1.0) / 3.0, 7)])
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["x", "y"]
    assert float(rows[1][0]) == value
    assert float(rows[2][0]) == 1.0 / 3.0
    assert rows[2][1] == "7"


def test_version_tag(monkeypatch):
    monkeypatch.delenv("GIT_COMMIT", raising=False)
    assert version_tag() == LAB_VERSION
    monkeypatch.setenv("GIT_COMMIT", "0123456789abcdef")
    assert version_tag() == f"{LAB_VERSION}+0123456789ab"
    assert RunRecord(command="selftest").version.endswith("+0123456789ab")
