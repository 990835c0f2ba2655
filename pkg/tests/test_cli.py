import csv
import json
from pathlib import Path

import numpy as np
import pytest

from cpcca.cli import main

from conftest import CYCLE3, aligned_max_diff, symmetric_circulant

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    status = main(list(argv))
    out, err = capsys.readouterr()
    return status, out, err


def error_code(err):
    return json.loads(err)["error"]["code"]


def schema(obj):
    """Nested key structure with leaf types, used for the golden comparison."""
    if isinstance(obj, dict):
        return {k: schema(v) for k, v in sorted(obj.items())}
    if isinstance(obj, list):
        return [schema(obj[0])] if obj else []
    return type(obj).__name__


def without_timing(d):
    return {k: v for k, v in d.items() if k != "timing"}


def read_csv(path):
    with open(path) as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh)])


# -- cluster ---------------------------------------------------------------

def test_cluster_example1(capsys, tmp_path):
    status, out, _ = run(capsys, "cluster", "--fixture", "example1", "--n-clusters", "3",
                         "--mode", "real", "--out-dir", str(tmp_path))
    assert status == 0
    report = json.loads(out)
    lam = [complex(*z) for z in report["eigenvalues"]]
    np.testing.assert_allclose(lam, [1, 0.9557 + 0.0177j, 0.9557 - 0.0177j], atol=5e-4)
    ref = symmetric_circulant(0.9705, 0.0250, 0.0046)
    assert aligned_max_diff(report["coarse_matrix"], ref) <= 1e-3
    assert read_csv(tmp_path / "membership.csv").shape == (6, 3)
    np.testing.assert_array_equal(read_csv(tmp_path / "coarse.csv"), report["coarse_matrix"])
    assert json.loads((tmp_path / "report.json").read_text()) == report


def test_cluster_report_schema_golden(capsys, tmp_path):
    run(capsys, "cluster", "--fixture", "example1", "--n-clusters", "3",
        "--out-dir", str(tmp_path))
    report = json.loads((tmp_path / "report.json").read_text())
    golden = json.loads((GOLDEN / "cluster_report_schema.json").read_text())
    assert schema(report) == golden


def test_cluster_case_i_cyclic(capsys, tmp_path):
    status, out, _ = run(capsys, "cluster", "--fixture", "example2:0.9:0.1", "--n-clusters",
                         "3", "--mode", "magnitude", "--out-dir", str(tmp_path))
    assert status == 0
    assert aligned_max_diff(json.loads(out)["coarse_matrix"], CYCLE3) <= 1e-2


def test_cluster_outputs_byte_stable(capsys, tmp_path):
    argv = ["cluster", "--generate", "circular:3:10:0.1:42", "--n-clusters", "3",
            "--mode", "magnitude"]
    run(capsys, *argv, "--out-dir", str(tmp_path / "a"))
    run(capsys, *argv, "--out-dir", str(tmp_path / "b"))
    for name in ("membership.csv", "coarse.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    a = json.loads((tmp_path / "a" / "report.json").read_text())
    b = json.loads((tmp_path / "b" / "report.json").read_text())
    assert json.dumps(without_timing(a), sort_keys=True) == \
        json.dumps(without_timing(b), sort_keys=True)


def test_generate_then_cluster(capsys, tmp_path):
    m = tmp_path / "m.mtx"
    status, _, _ = run(capsys, "generate", "circular", "--blocks", "3", "--block-size", "10",
                       "--eps", "0.1", "--seed", "42", "--out", str(m))
    assert status == 0 and m.exists()
    status, out, _ = run(capsys, "cluster", "--in", str(m), "--n-clusters", "3",
                         "--mode", "magnitude", "--out-dir", str(tmp_path))
    assert status == 0
    Pc = np.array(json.loads(out)["coarse_matrix"])
    # a permuted near-identity: every row has one dominant entry, one per column
    assert sorted(np.argmax(Pc, axis=1)) == [0, 1, 2]
    assert Pc.max(axis=1).min() > 0.5


def test_generate_seed_from_environment(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("CPCCA_SEED", "42")
    run(capsys, "generate", "circular", "--eps", "0.1", "--out", str(tmp_path / "a.csv"))
    run(capsys, "generate", "circular", "--eps", "0.1", "--seed", "42",
        "--out", str(tmp_path / "b.csv"))
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_cluster_scan(capsys, tmp_path):
    status, out, _ = run(capsys, "cluster", "--fixture", "example1", "--scan", "2:4",
                         "--out-dir", str(tmp_path))
    assert status == 0
    report = json.loads(out)
    assert report["scan"]["selected"] == 3
    assert report["n_clusters"] == 3


# -- spectrum --------------------------------------------------------------

def test_spectrum_case_i(capsys):
    status, out, _ = run(capsys, "spectrum", "--fixture", "example2:0.9:0.1", "--count", "3",
                         "--mode", "magnitude")
    assert status == 0
    lam = [complex(*z) for z in json.loads(out)["modes"]["magnitude"]["eigenvalues"]]
    np.testing.assert_allclose(lam, [1, -0.5 + 0.8660254j, -0.5 - 0.8660254j], atol=1e-6)


def test_spectrum_both_modes_schema_golden(capsys):
    status, out, _ = run(capsys, "spectrum", "--fixture", "example1", "--count", "3")
    assert status == 0
    golden = json.loads((GOLDEN / "spectrum_report_schema.json").read_text())
    assert schema(json.loads(out)) == golden


def test_spectrum_check_circular(capsys):
    status, out, _ = run(capsys, "spectrum", "--generate", "circular:3:10:0",
                         "--check-circular")
    assert status == 0
    assert json.loads(out)["circular_check"]["passed"] is True
    status, _, _ = run(capsys, "spectrum", "--generate", "circular:3:10:0.1",
                       "--check-circular")
    assert status == 3


def test_spectrum_count_too_large(capsys):
    status, _, err = run(capsys, "spectrum", "--count", "9", "--fixture", "example1")
    assert status != 0
    assert error_code(err) == "INVALID_SELECTION"


# -- bench and fixtures ----------------------------------------------------

def test_bench_csv_rows(capsys, tmp_path):
    out_csv = tmp_path / "b.csv"
    status, out, _ = run(capsys, "bench", "--sizes", "30,60,90,120", "--trials", "5",
                         "--gen", "circular", "--eps", "0", "--out-csv", str(out_csv))
    assert status == 0
    rows = list(csv.DictReader(out_csv.open()))
    assert len(rows) == 20
    assert all(r["status"] == "ok" for r in rows)
    golden = json.loads((GOLDEN / "bench_report_schema.json").read_text())
    assert schema(json.loads(out)) == golden


def test_bench_plan_file(capsys, tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"sizes": [30], "trials": 2, "eps": 0.1, "warmup": False}))
    status, out, _ = run(capsys, "bench", "--plan", str(plan))
    assert status == 0
    assert json.loads(out)["plan"]["trials"] == 2
    plan.write_text("{not json")
    status, _, err = run(capsys, "bench", "--plan", str(plan))
    assert status == 1 and error_code(err) == "PARSE_ERROR"


def test_fixtures_list(capsys):
    status, out, _ = run(capsys, "fixtures", "--list")
    assert status == 0
    assert out.split() == ["example1", "example2:0.9:0.1", "example2:0.1:0.9"]


def test_fixtures_export(capsys, tmp_path):
    path = tmp_path / "e.csv"
    status, _, _ = run(capsys, "fixtures", "--export", "example1", "--out", str(path))
    assert status == 0
    assert read_csv(path)[0, 1] == 0.7


# -- errors ----------------------------------------------------------------

@pytest.mark.parametrize("argv, code", [
    (["cluster", "--in", "missing.mtx", "--n-clusters", "3"], "FILE_NOT_FOUND"),
    (["cluster", "--fixture", "example9", "--n-clusters", "3"], "UNKNOWN_FIXTURE"),
    (["cluster", "--fixture", "example1", "--n-clusters", "2"], "SPLIT_CONJUGATE_PAIR"),
    (["cluster", "--fixture", "example1", "--scan", "2-4"], "INVALID_ARGUMENT"),
    (["spectrum", "--generate", "circular:3", "--count", "2"], "INVALID_ARGUMENT"),
    (["generate", "circular", "--blocks", "1", "--out", "x.mtx"], "INVALID_SPEC"),
    (["bench", "--sizes", "60,30"], "INVALID_SPEC"),
    (["bench", "--plan", "missing.json"], "FILE_NOT_FOUND"),
])
def test_error_codes(capsys, tmp_path, monkeypatch, argv, code):
    monkeypatch.chdir(tmp_path)
    status, out, err = run(capsys, *argv)
    assert status == 1
    assert error_code(err) == code
    assert out == ""


@pytest.mark.parametrize("argv", [
    ["cluster", "--fixture", "example1"],
    ["cluster", "--fixture", "example1", "--n-clusters", "3", "--scan", "2:4"],
    ["cluster", "--fixture", "example1", "--in", "x.mtx", "--n-clusters", "3"],
    ["frobnicate"],
])
def test_usage_errors(capsys, argv):
    status, _, err = run(capsys, *argv)
    assert status == 2
    assert error_code(err) == "USAGE_ERROR"


def test_malformed_matrix_file(capsys, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0.5,0.5,0\n0.5,0.5,0\n")
    status, _, err = run(capsys, "cluster", "--in", str(path), "--n-clusters", "2")
    assert status == 1
    assert error_code(err) == "PARSE_ERROR"
    assert json.loads(err)["error"]["message"]
