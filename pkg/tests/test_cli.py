from __future__ import annotations

import csv
import io
import json

import pytest

from fracyam.cli import run


def _csv(capsys, argv, code=0):
    assert run(argv) == code
    return list(csv.DictReader(io.StringIO(capsys.readouterr().out)))


def test_constants_table(capsys):
    rows = {r["quantity"]: r for r in _csv(capsys, ["constants", "--n", "3", "--gamma", "0.5"])}
    assert rows["kappa"]["value"] == "1.0"
    assert rows["alpha"]["value"] == "2.0"
    assert rows["two_star"]["value"] == "2.0"
    assert all(r["n"] == "3" and r["gamma"] == "0.5" and r["seed"] == "0" for r in rows.values())


def test_dtn_table(capsys):
    rows = _csv(capsys, ["dtn", "--gamma", "0.25", "--modes", "1..8"])
    assert [int(r["k"]) for r in rows] == list(range(1, 9))
    assert max(float(r["rel_error"]) for r in rows) < 1e-3
    assert rows[0]["grid_normal"] == "200"


def test_expand_scan(capsys):
    rows = {r["quantity"]: r for r in _csv(capsys, ["expand", "--case", "A1", "--II-norm", "1",
                                                    "--scan-C1"])}
    assert float(rows["C_opt"]["value"]) == pytest.approx(-0.5, abs=0.02)


def test_unknown_flag_and_bad_values(capsys):
    assert run(["constants", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err
    assert run(["constants", "--gamma", "1.5"]) == 2
    assert run(["dtn", "--grid-normal", "-3"]) == 2
    assert run([]) == 2


def test_non_convergence_exit_code(capsys):
    assert run(["minimize", "--grid-tangential", "16", "--grid-normal", "40", "--maxiter", "2",
                "--init", "random"]) == 3


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# bubble samples\nn = 4\ngamma = 0.5\npoints = 3\n")
    rows = _csv(capsys, ["bubble", "--config", str(cfg), "--points", "5"])
    assert len(rows) == 5 and rows[0]["n"] == "4"
    cfg.write_text("nonsense-line\n")
    assert run(["bubble", "--config", str(cfg)]) == 2


def test_json_mirrors_csv(tmp_path, capsys):
    out = tmp_path / "c.json"
    assert run(["constants", "--n", "5", "--format", "json", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["columns"][:2] == ["quantity", "value"]
    kappa = next(r for r in data["rows"] if r["quantity"] == "kappa")
    assert kappa["value"] == 1.0


def test_minimize_is_byte_deterministic(tmp_path):
    args = ["minimize", "--grid-tangential", "16", "--grid-normal", "60", "--init", "random",
            "--seed", "5", "--beta", "2.5"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(args + ["--out", str(a)]) == 0
    assert run(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_continue_reports_criterion(capsys):
    rows = _csv(capsys, ["continue", "--grid-tangential", "16", "--grid-normal", "60",
                         "--beta-schedule", "2.0,3.0"])
    assert rows[-1]["criterion"] == "strict"
