import csv
import os

import pytest

import labcli
from field import GridSpec, gaussian, ring
from records import RUN_RECORD_FILE, read_run_record

SWEEP_CONFIG = """
name = "derive-sweep"

[params]
N = 2
alpha = 0.8
gamma = 0.1
p = 2.0

[sweep]
alpha = {alpha}
gamma = [0.0, 0.1, 0.2]
p = [2.0, 3.0, 4.0]
command = "derive"
"""

DEFOCUSING_CONFIG = """
[params]
N = 2
alpha = 0.8
gamma = 0.1
p = 2.0
epsilon = -1

[grid]
n = 64
L = 8.0

[evolution]
dt = 1e-4
T = 0.01
record_every = 20

[initial]
amplitude = 0.5
"""

FOCUSING_CONFIG = """
name = "focusing-small"

[params]
N = 2
alpha = 0.8
gamma = 0.1
p = 2.0

[grid]
n = 128
L = 12.0

[evolution]
dt = 1e-3
T = 0.05
record_every = 10

[initial]
deltas = [0.01]
well_amplitudes = [0.5, 0.9]
"""


@pytest.fixture(scope="module")
def focusing_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("config") / "focusing.toml"
    path.write_text(FOCUSING_CONFIG)
    return str(path)


def run(tmp_path, *argv):
    out = str(tmp_path / "out")
    return labcli.main([*argv, "--out", out]), out


def read_table(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_derive(tmp_path):
    code, out = run(tmp_path, "derive", "--scenario", "subcritical")
    assert code == 0
    record = read_run_record(os.path.join(out, RUN_RECORD_FILE))
    assert record["command"] == "derive"
    assert record["scalars"]["exponents.B"] == pytest.approx(1.125)
    assert record["scalars"]["regime.criticality"] == "subcritical"
    assert record["config"]["params"]["p"] == 2.0


def test_derive_critical(tmp_path):
    code, out = run(tmp_path, "derive", "--scenario", "critical")
    assert code == 0
    record = read_run_record(os.path.join(out, RUN_RECORD_FILE))
    assert record["scalars"]["mass_critical_p"] == pytest.approx(2.7)


def test_selftest(tmp_path):
    code, out = run(tmp_path, "selftest", "--scenario", "subcritical", "--seed", "3")
    record = read_run_record(os.path.join(out, RUN_RECORD_FILE))
    assert code == 0, record["findings"]
    names = {gate["name"] for gate in record["gates"]}
    assert {"exponent_identity", "parseval", "propagator_group_law", "K_derivative_amplitude"} <= names


def test_sweep(tmp_path):
    path = tmp_path / "sweep.toml"
    path.write_text(SWEEP_CONFIG.format(alpha="[0.7, 0.8, 0.9]"))
    code, out = run(tmp_path, "sweep", "--config", str(path))
    assert code == 0
    rows = read_table(os.path.join(out, "sweep.csv"))
    assert len(rows) == 27
    assert {row["status"] for row in rows} == {"ok"}
    assert os.path.exists(os.path.join(out, "point_026", RUN_RECORD_FILE))
    assert float(rows[0]["exponents.A"]) + float(rows[0]["exponents.B"]) == pytest.approx(3.0)


def test_sweep_with_worker_processes(tmp_path):
    path = tmp_path / "sweep.toml"
    path.write_text(SWEEP_CONFIG.format(alpha="[0.8]"))
    code, out = run(tmp_path, "sweep", "--config", str(path), "--threads", "2")
    assert code == 0
    rows = read_table(os.path.join(out, "sweep.csv"))
    assert [int(row["index"]) for row in rows] == list(range(9))


def test_sweep_marks_invalid_points(tmp_path):
    path = tmp_path / "sweep.toml"
    path.write_text(SWEEP_CONFIG.format(alpha="[0.8, 1.2]"))
    code, out = run(tmp_path, "sweep", "--config", str(path))
    assert code == 2
    rows = read_table(os.path.join(out, "sweep.csv"))
    assert [row["status"] for row in rows].count("invalid") == 9
    record = read_run_record(os.path.join(out, RUN_RECORD_FILE))
    assert record["scalars"]["completed"] == 9


def test_evolve_defocusing(tmp_path):
    path = tmp_path / "evolve.toml"
    path.write_text(DEFOCUSING_CONFIG)
    code, out = run(tmp_path, "evolve", "--config", str(path))
    record = read_run_record(os.path.join(out, RUN_RECORD_FILE))
    assert code == 0, record["findings"]
    assert record["scalars"]["outcome"] == "completed"
    assert os.path.exists(os.path.join(out, record["artifacts"]["evolution"]))
    assert os.path.exists(os.path.join(out, "evolution_final.fld"))


def gate_names(record):
    return {gate["name"] for gate in record["gates"]}


def test_groundstate_end_to_end(tmp_path, focusing_config):
    code, out = run(tmp_path, "groundstate", "--config", focusing_config)
    record = read_run_record(os.path.join(out, RUN_RECORD_FILE))
    assert code == 0, record["findings"]
    assert {"petviashvili_residual", "minimizer_converged", "minimizer_euler_residual", "minimizer_unit_pair",
            "route_agreement", "K_pairs_vanish"} <= gate_names(record)
    assert record["scalars"]["minimizer.unit_pair_drift"] < 1e-12
    assert record["scalars"]["route_action_gap"] < 1e-3
    rows = read_table(os.path.join(out, "minimizer_log.csv"))
    assert list(rows[0]) == ["iteration", "J", "stationarity", "euler_residual", "relative_change"]
    assert float(rows[-1]["stationarity"]) == pytest.approx(record["scalars"]["minimizer.stationarity"])


def test_constant_end_to_end(tmp_path, focusing_config):
    code, out = run(tmp_path, "constant", "--config", focusing_config)
    record = read_run_record(os.path.join(out, RUN_RECORD_FILE))
    assert code == 0, record["findings"]
    assert {"C_times_beta", "gn_inequality", "J_scaling_invariance", "strauss_bound"} <= gate_names(record)
    assert record["scalars"]["J_scaling_invariance"] < 1e-10
    assert len(read_table(os.path.join(out, "constants.csv"))) == 1


def test_stability_end_to_end(tmp_path, focusing_config):
    code, out = run(tmp_path, "stability", "--config", focusing_config)
    record = read_run_record(os.path.join(out, RUN_RECORD_FILE))
    assert code == 0, record["findings"]
    assert "delta_0.01.orbital_stability" in gate_names(record)
    assert os.path.exists(os.path.join(out, "stability_delta_0.01.csv"))


def test_wellcheck_end_to_end(tmp_path, focusing_config):
    code, out = run(tmp_path, "wellcheck", "--config", focusing_config)
    record = read_run_record(os.path.join(out, RUN_RECORD_FILE))
    assert code == 0, record["findings"]
    names = gate_names(record)
    for label in ("c_0.5", "c_0.9"):
        assert {f"{label}.a_priori_bound", f"{label}.well_pairs_agree", f"{label}.well_trapping_2_1"} <= names
    assert "minimizer_converged" in names
    assert record["scalars"]["C_bound"] >= record["scalars"]["C_formula"]


def test_sweep_is_deterministic(tmp_path):
    path = tmp_path / "sweep.toml"
    path.write_text(SWEEP_CONFIG.format(alpha="[0.7, 0.8]"))
    tables = []
    for stem, threads in (("first", "1"), ("second", "1"), ("parallel", "2")):
        code = labcli.main(["sweep", "--config", str(path), "--out", str(tmp_path / stem), "--threads", threads])
        assert code == 0
        tables.append((tmp_path / stem / "sweep.csv").read_text())
    assert tables[0] == tables[1] == tables[2]


def test_groundstate_command_outside_regime(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[params]\nN = 2\nalpha = 0.8\ngamma = 0.1\np = 12.0\n[grid]\nn = 64\nL = 8.0\n")
    code, _ = run(tmp_path, "groundstate", "--config", str(path))
    assert code == 1


def test_missing_config_is_an_error(tmp_path):
    code, _ = run(tmp_path, "derive", "--config", str(tmp_path / "absent.toml"))
    assert code == 1


def test_threads_must_be_positive(tmp_path):
    code, _ = run(tmp_path, "derive", "--scenario", "subcritical", "--threads", "0")
    assert code == 1


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        labcli.build_parser().parse_args([])


def test_radially_decreasing_profiles():
    grid = GridSpec(2, 64, 8.0)
    assert labcli._radially_decreasing(gaussian(grid))
    assert not labcli._radially_decreasing(ring(grid, 2.0))
