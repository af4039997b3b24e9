import csv
import json
import subprocess
import sys

import pytest

from ginibre_edge import cli
from ginibre_edge.cli import main

SMALL_GUMBEL = ["gumbel", "--n", "40", "--kind", "complex", "--trials", "20", "--seed", "3", "--abs-thresholds", "1.2,1.3"]


def test_gumbel_example(tmp_path):
    # the documented example with fewer trials; the full 1e4-trial run is in the acceptance suite
    out = tmp_path / "g.json"
    argv = ["gumbel", "--n", "200", "--kind", "complex", "--trials", "200", "--seed", "7",
            "--abs-thresholds", "1.10,1.15,1.20", "--out", str(out)]
    assert main(argv) == 0
    doc = json.loads(out.read_text())
    assert len(doc["rows"]) == 3
    assert [r["threshold"] for r in doc["rows"]] == [1.10, 1.15, 1.20]
    assert doc["effective_config"]["trials"] == 200
    assert doc["config"]["master_seed"] == 7


def test_fredholm_example_needs_positive_gamma(capsys):
    assert main(["fredholm", "--n", "1e6", "--t", "0", "--kind", "complex"]) == 2
    err = capsys.readouterr().err
    assert "gamma_n <= 0; minimal n" in err and "6.8e+08" in err


def test_drift_example(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["drift", "--ns", "1e10,1e12,1e14", "--ts", "-1,0,1,2", "--kind", "real", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["n", "t", "det", "limit", "dev", "normdev"]
    assert len(rows) == 13


def test_outputs_are_byte_identical(tmp_path):
    out = tmp_path / "g.json"
    argv = SMALL_GUMBEL + ["--out", str(out), "--csv", str(tmp_path / "c.csv")]
    assert main(argv) == 0
    first = out.read_bytes(), (tmp_path / "c.csv").read_bytes()
    assert main(argv) == 0
    assert (out.read_bytes(), (tmp_path / "c.csv").read_bytes()) == first


def test_csv_outputs(tmp_path):
    c, s = tmp_path / "c.csv", tmp_path / "s.csv"
    assert main(SMALL_GUMBEL + ["--out", str(tmp_path / "g.json"), "--csv", str(c), "--samples-csv", str(s)]) == 0
    assert len(c.read_text().splitlines()) == 3
    assert len(s.read_text().splitlines()) == 21


def test_unknown_flag_is_an_error(capsys):
    assert main(SMALL_GUMBEL + ["--bogus"]) == 1
    assert "bogus" in capsys.readouterr().err


def test_missing_option(capsys):
    assert main(["fredholm", "--n", "200"]) == 1
    assert "--t or --s" in capsys.readouterr().err


def test_invalid_values_exit_one():
    assert main(["gumbel", "--n", "2.5", "--abs-thresholds", "1.2"]) == 1
    assert main(["gumbel", "--n", "40", "--trials", "0", "--abs-thresholds", "1.2"]) == 1
    assert main(["sample", "--n", "5", "--kind", "quaternion"]) == 1
    assert main(["fredholm", "--n", "200", "--t", "0", "--s", "1.1"]) == 1


def test_json_errors(capsys):
    assert main(["fredholm", "--n", "1e6", "--t", "0", "--json"]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["exit_status"] == 2 and err["error"] == "regime"
    assert main(["gumbel", "--bogus", "--json"]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["exit_status"] == 1 and err["error"] == "validation"


def test_help_lists_every_flag(capsys):
    parser = cli.build_parser()
    sub = next(a for a in parser._actions if a.__class__.__name__ == "_SubParsersAction")
    for verb, p in sub.choices.items():
        with pytest.raises(SystemExit) as exc:
            main([verb, "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        for action in p._actions:
            for opt in action.option_strings:
                assert opt in text


def test_scientific_notation_for_n():
    assert cli.int_n("1e12") == 10**12
    assert cli.int_n("200") == 200
    for bad in ("1.5", "0", "-3", "abc"):
        with pytest.raises(Exception):
            cli.int_n(bad)


def test_config_file_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 200, "s": 1.2, "kind": "real"}))
    assert main(["fredholm", "--config", str(cfg), "--kind", "complex"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["effective_config"]["kind"] == "complex"
    assert doc["effective_config"]["n"] == 200
    assert doc["report"]["kind"] == "complex"


def test_config_unknown_keys(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 200, "colour": "red"}))
    assert main(["fredholm", "--config", str(cfg), "--s", "1.2"]) == 1
    assert main(["fredholm", "--config", str(tmp_path / "missing.json"), "--s", "1.2"]) == 1


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv("GINIBRE_EDGE_THREADS", "3")
    _, eff, _ = cli.resolve(["sample", "--n", "4"])
    assert eff["threads"] == 3
    _, eff, _ = cli.resolve(["sample", "--n", "4", "--threads", "2"])
    assert eff["threads"] == 2
    monkeypatch.setenv("GINIBRE_EDGE_THREADS", "many")
    assert main(["sample", "--n", "4"]) == 1


def test_threads_do_not_change_results(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(SMALL_GUMBEL + ["--out", str(a)]) == 0
    assert main(SMALL_GUMBEL + ["--out", str(b), "--threads", "2"]) == 0
    da, db = json.loads(a.read_text()), json.loads(b.read_text())
    assert da["rows"] == db["rows"] and da["samples"] == db["samples"]
    assert da["config_hash"] == db["config_hash"]


def test_sample_verb(capsys):
    assert main(["sample", "--n", "6", "--kind", "real", "--seed", "1", "--eigenvalues"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["eigenvalues"]) == 6
    assert doc["summary"]["n"] == 6


def test_fredholm_absolute(capsys):
    assert main(["fredholm", "--n", "200", "--s", "1.1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["report"]["fredholm_det"] == pytest.approx(0.9995342091, abs=1e-9)
    assert doc["limit"] is None


def test_fredholm_rescaled(capsys):
    assert main(["fredholm", "--n", "1e12", "--t", "2", "--method", "trace_series"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["report"]["fredholm_det"] == pytest.approx(0.9161475515, abs=1e-6)
    assert doc["limit"] == pytest.approx(0.8734230184931167)


def test_radius_and_poisson_verbs(tmp_path):
    assert main(["radius", "--n", "200", "--trials", "5", "--ts", "-1,0", "--out", str(tmp_path / "r.json")]) == 0
    assert len(json.loads((tmp_path / "r.json").read_text())["rows"]) == 2
    assert main(["poisson", "--n", "40", "--trials", "5", "--abs-thresholds", "1.0", "--out", str(tmp_path / "p.json")]) == 0
    assert len(json.loads((tmp_path / "p.json").read_text())["rows"]) == 6
    assert main(["gumbel", "--real-max", "--kind", "real", "--n", "40", "--trials", "5", "--ts", "1,2",
                 "--out", str(tmp_path / "m.json")]) == 0


def test_kernel_check_verb(capsys):
    assert main(["kernel-check", "--n", "10", "--pairs", "2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["checks"]["mass_rel_error"] < 1e-8
    assert main(["kernel-check", "--n", "1e6"]) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "ginibre_edge", "fredholm", "--n", "1e6", "--t", "0"],
                       capture_output=True, text=True)
    assert r.returncode == 2
    assert "minimal n" in r.stderr
