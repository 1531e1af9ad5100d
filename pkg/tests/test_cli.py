import csv
import io
import json

import pytest

from dirichlet_ops.cli import main

IDENTITY = json.dumps({"c0": 1, "phi": {"coeffs": []}})
DILATION = json.dumps({"c0": 2, "phi": {"coeffs": []}})
HS_SYMBOL = json.dumps({"c0": 0, "phi": {"coeffs": [[1, 1.25, 0], [2, 0.25, 0]]}})
INVALID = json.dumps({"c0": 1, "phi": {"coeffs": [[2, 1, 0]]}})


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, list(csv.DictReader(io.StringIO(out)))


def test_norm(capsys):
    code, rows = run(capsys, "norm", "--poly", '{"coeffs": [[1, 1, 0], [2, 1, 0]]}', "--k", "1,2")
    assert code == 0
    vals = {(r["space"], r["k"]): float(r["value"]) for r in rows}
    assert vals[("H2", "1")] == pytest.approx(2 ** 0.5)
    assert vals[("H2k", "2")] == pytest.approx(6 ** 0.25)


def test_compose(capsys):
    code, rows = run(capsys, "compose", "--poly", '{"coeffs": [[2, 1, 0], [3, 2, 0]]}', "--symbol", DILATION,
                     "--cutoff", "100")
    assert code == 0
    assert {int(r["n"]): float(r["re"]) for r in rows} == {4: 1.0, 9: 2.0}


def test_counting(capsys):
    code, rows = run(capsys, "counting", "--symbol", IDENTITY, "--s-grid", "0.5+1j,2")
    assert code == 0
    assert [int(r["root_count"]) for r in rows] == [1, 1]
    assert float(rows[0]["n_phi"]) == pytest.approx(0.5)


def test_opnorm_and_hsnorm(capsys):
    code, rows = run(capsys, "opnorm", "--symbol", DILATION, "--N", "16,64")
    assert code == 0 and all(float(r["norm"]) <= 1 + 1e-9 for r in rows)
    code, rows = run(capsys, "hsnorm", "--symbol", HS_SYMBOL, "--N", "10,100")
    assert code == 0
    assert float(rows[1]["upper"]) <= float(rows[0]["upper"])


def test_essnorm_and_compactness(capsys):
    code, rows = run(capsys, "essnorm", "--symbol", DILATION, "--sigma-grid", "0.25,0.0625,0.015625,0.00390625",
                     "--t-grid", "0")
    assert code == 0
    code, rows = run(capsys, "compactness", "--symbol", IDENTITY, "--sigma-grid", "0.5,0.125,0.03125",
                     "--t-grid", "0")
    assert code == 0 and rows[0]["verdict"] == "not compact"


def test_carleson(capsys):
    code, rows = run(capsys, "carleson", "--symbol", IDENTITY, "--h-grid", "0.125,0.0625", "--t-grid", "0,1")
    assert code == 0
    assert float(rows[0]["lambda"]) == pytest.approx(0.5, abs=1e-6)


def test_invalid_symbol_exit_code(capsys):
    assert main(["opnorm", "--symbol", INVALID, "--N", "8"]) == 2
    assert "validation" in capsys.readouterr().err


def test_out_file(tmp_path, capsys):
    target = tmp_path / "n.csv"
    assert main(["norm", "--poly", '{"coeffs": [[1, 3, 0]]}', "--out", str(target)]) == 0
    assert target.read_text().splitlines()[0] == "space,k,value"


def test_verify_writes_reports(tmp_path, capsys):
    cfg = "configs/identity.json"
    assert main(["verify", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 0
    assert (tmp_path / "checks.csv").exists() and (tmp_path / "summary.txt").exists()
    assert main(["verify", "--config", "configs/invalid.json", "--out", str(tmp_path / "bad"), "--quiet"]) == 1
