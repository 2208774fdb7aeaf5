import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from mopuc.cli import RunConfig, UsageError, dumps, load_alphas, main

LEB2 = {"ell": 2, "ac": {"kind": "fourier", "coeffs": {"0": [[1, 0], [0, 1]]}}}
BS05 = {"ell": 1, "ac": {"kind": "bernstein_szego", "alphas": [[0.5]]}}
INDEFINITE = {"ell": 2, "ac": {"kind": "fourier", "coeffs": {"0": [[1, 0], [0, 1]], "1": [[2, 0], [0, 0]]}}}
ONE_ATOM = {"ell": 1, "atoms": [{"theta": 0.0, "mass": [1]}]}


@pytest.fixture
def files(tmp_path):
    def put(name, doc):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return str(p)

    return put


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def matrices(doc_list, ell):
    return [np.array([complex(*e) for e in m]).reshape(ell, ell) for m in doc_list]


def test_verblunsky_lebesgue(files, capsys):
    code, out, _ = run(capsys, "verblunsky", "--measure", files("m.json", LEB2), "--n", "4")
    assert code == 0
    doc = json.loads(out)
    assert doc["ell"] == 2 and len(doc["alphas"]) == 4
    assert all(np.abs(a).max() == 0 for a in matrices(doc["alphas"], 2))


def test_verblunsky_bs(files, capsys):
    code, out, _ = run(capsys, "verblunsky", "--measure", files("m.json", BS05), "--n", "4")
    assert code == 0
    alphas = [a[0, 0] for a in matrices(json.loads(out)["alphas"], 1)]
    np.testing.assert_allclose(alphas, [0.5, 0, 0, 0], atol=1e-7)


def test_verblunsky_output_reloads(files, capsys, tmp_path):
    out_path = tmp_path / "alphas.json"
    code, _, _ = run(capsys, "verblunsky", "--measure", files("m.json", BS05), "--n", "3", "--out", str(out_path))
    assert code == 0
    seq = load_alphas(out_path)
    assert len(seq) == 3 and seq.alphas[0, 0, 0] == pytest.approx(0.5)


def test_validation_error_exit(files, capsys):
    code, out, err = run(capsys, "verblunsky", "--measure", files("m.json", INDEFINITE))
    assert code == 2
    assert "NotNonnegative" in err and out == ""


def test_numerical_error_exit(files, capsys):
    code, _, err = run(capsys, "verblunsky", "--measure", files("m.json", ONE_ATOM), "--n", "3")
    assert code == 3
    assert "ToeplitzNotPD" in err


def test_parse_error_exit(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text("{")
    code, _, err = run(capsys, "entropy", "--measure", str(p))
    assert code == 2 and "ParseError" in err


def test_noncontractive_alphas_exit(files, capsys):
    code, _, err = run(capsys, "bs-density", "--alphas", files("a.json", {"ell": 1, "alphas": [[1.5]]}))
    assert code == 2 and "NotContractive" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["entropy"],
        ["entropy", "--measure", "a", "--alphas", "b"],
        ["entropy", "--measure", "a", "--grid", "100"],
        ["entropy", "--measure", "a", "--grid", "32"],
        ["entropy", "--measure", "a", "--n", "-1"],
        ["frobnicate", "--measure", "a"],
        ["entropy", "--measure", "a", "--format", "xml"],
        ["entropy", "--measure", "a", "--tol", "bogus=1"],
        ["entropy", "--measure", "a", "--tol", "eig_tol"],
    ],
)
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert "usage" in err


def test_run_config_invariants():
    with pytest.raises(UsageError):
        RunConfig("entropy")
    with pytest.raises(UsageError):
        RunConfig("entropy", measure_path="m", grid=96)
    assert RunConfig("entropy", measure_path="m", grid=64).grid == 64


def test_entropy_lebesgue(files, capsys):
    code, out, _ = run(capsys, "entropy", "--measure", files("m.json", LEB2))
    assert code == 0
    doc = json.loads(out)
    assert np.abs(matrices([doc["entropy"]], 2)[0]).max() == 0
    assert doc["trace"] == 0


def test_entropy_csv(files, capsys):
    code, out, _ = run(capsys, "entropy", "--measure", files("m.json", BS05), "--format", "csv")
    assert code == 0
    (row,) = list(csv.DictReader(io.StringIO(out)))
    assert float(row["re"]) == pytest.approx(math.log(0.75), abs=1e-12)


def test_szego_report_scalar_bs(files, capsys):
    code, out, _ = run(capsys, "szego-report", "--measure", files("m.json", BS05), "--n", "8", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["n"]) for r in rows] == list(range(9))
    for r in rows[1:]:
        assert float(r["trace_residual"]) < 1e-8
    ent_tr = math.log(0.75)
    for r in rows:
        tr, det = float(r["tr_log_beta"]), float(r["det_product"])
        assert abs(tr - det) < 1e-8
        assert tr <= 1e-10
        assert tr >= ent_tr - 1e-6


def test_szego_report_json_from_alphas(files, capsys):
    alphas = {"ell": 2, "alphas": [[[0.3, 0], [0.1, 0.1], [0, 0], [0.2, 0]]]}
    code, out, _ = run(capsys, "szego-report", "--alphas", files("a.json", alphas), "--n", "3", "--grid", "1024")
    assert code == 0
    doc = json.loads(out)
    assert doc["grid"] == 1024 and len(doc["rows"]) == 4
    assert doc["rows"][3]["matrix_residual"] < 1e-8


def test_hl_lebesgue(files, capsys):
    code, out, _ = run(capsys, "hl", "--measure", files("m.json", LEB2), "--n", "3")
    assert code == 0
    doc = json.loads(out)
    np.testing.assert_allclose(matrices([doc["distance"]], 2)[0], np.eye(2), atol=1e-15)
    assert doc["infimum"]["lhs"] == pytest.approx(1) and doc["infimum"]["rhs"] == pytest.approx(1)


def test_hl_csv(files, capsys):
    code, out, _ = run(capsys, "hl", "--measure", files("m.json", BS05), "--n", "3", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert float(rows[-1]["rhs"]) == pytest.approx(0.75, abs=1e-9)
    assert float(rows[-1]["distance_trace"]) == pytest.approx(math.sqrt(0.75), abs=1e-9)


def test_bs_density(files, capsys):
    code, out, _ = run(capsys, "bs-density", "--alphas", files("a.json", {"ell": 1, "alphas": [[0.5]]}), "--grid", "64", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 64
    assert float(rows[0]["re00"]) == pytest.approx(3.0)


def test_bs_density_requires_alphas(files, capsys):
    code, _, err = run(capsys, "bs-density", "--measure", files("m.json", LEB2))
    assert code == 1


def test_roundtrip(files, capsys):
    alphas = {"ell": 2, "alphas": [[[0.3, 0.1], 0, 0.2, [0.1, -0.2]], [0, 0.4, [0, 0.3], 0]]}
    code, out, _ = run(capsys, "roundtrip", "--alphas", files("a.json", alphas), "--n", "5")
    assert code == 0
    doc = json.loads(out)
    assert doc["passed"] and doc["max_error"] < 1e-6 and len(doc["alphas"]) == 5


def test_roundtrip_rejects_coarse_grid(files, capsys):
    a = files("a.json", {"ell": 1, "alphas": [[0.97]]})
    # a 64-point grid cannot resolve this density: the normalization certificate trips
    code, _, err = run(capsys, "roundtrip", "--alphas", a, "--grid", "64")
    assert code == 2 and "NotNormalized" in err
    # with the certificate loosened the recovery runs but misses the tolerance
    code, out, err = run(capsys, "roundtrip", "--alphas", a, "--grid", "64", "--tol", "norm_tol=1", "--tol", "quad_tol=1")
    assert code == 3
    assert not json.loads(out)["passed"]


def test_floats_have_17_digits():
    assert dumps([0.1]) == "[0.10000000000000001]"
    assert dumps({"x": 1 / 3}) == '{\n "x": 0.33333333333333331\n}'
    assert json.loads(dumps({"a": [1.0, 2], "b": None, "c": True})) == {"a": [1.0, 2], "b": None, "c": True}


def test_deterministic(files, capsys):
    alphas = files("a.json", {"ell": 2, "alphas": [[[0.3, 0.1], 0, 0.2, [0.1, -0.2]]]})
    outs = {run(capsys, "szego-report", "--alphas", alphas, "--n", "4", "--format", "json")[1] for _ in range(3)}
    assert len(outs) == 1


def test_console_script_and_thread_cap(files, tmp_path):
    m = files("m.json", BS05)
    base = [sys.executable, "-m", "mopuc.cli", "szego-report", "--measure", m, "--n", "4", "--format", "csv"]
    a = subprocess.run(base, capture_output=True, text=True, env={"MOPUC_THREADS": "1", "PATH": ""})
    b = subprocess.run(base, capture_output=True, text=True)
    assert a.returncode == 0 and b.returncode == 0
    assert a.stdout == b.stdout
    bad = subprocess.run([sys.executable, "-m", "mopuc.cli", "entropy"], capture_output=True, text=True)
    assert bad.returncode == 1
