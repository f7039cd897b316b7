import csv
import json

import pytest

from hpme.cli import EXIT_CONFIG, EXIT_OK, EXIT_VERIFY, config_hash, dumps, main


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_geom_euclidean(tmp_path):
    out = tmp_path / "g"
    assert main(["geom", "--model", "euclidean", "--dim", "3", "--rmax", "20", "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader((out / "profile.csv").open()))
    row = next(r for r in rows if float(r["r"]) == 3.0)
    assert float(row["H"]) == pytest.approx(1.5, abs=1e-12)
    comp = json.loads((out / "completeness.json").read_text())
    assert comp["completeness"]["status"] == "complete"
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "geom" and man["pass"] is True
    assert man["config_hash"] == config_hash({k: v for k, v in man["config"].items()})


def test_unknown_model_is_config_error(tmp_path, capsys):
    code = main(["geom", "--model", "spherical", "--out", str(tmp_path)])
    assert code == EXIT_CONFIG
    assert "euclidean" in capsys.readouterr().err


def test_bad_flag_is_config_error(tmp_path):
    assert main(["geom", "--no-such-flag"]) == EXIT_CONFIG


def test_config_file_overrides_and_rejects_unknown(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "hyperbolic", "dim": 2, "rmax": 10}))
    out = tmp_path / "o"
    assert main(["geom", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "completeness.json").read_text())["N"] == 2
    cfg.write_text(json.dumps({"modle": "hyperbolic"}))
    assert main(["geom", "--config", str(cfg), "--out", str(out)]) == EXIT_CONFIG


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("HPME_OUT", str(tmp_path / "env"))
    assert main(["geom", "--rmax", "5"]) == EXIT_OK
    assert (tmp_path / "env" / "manifest.json").exists()


def test_identical_configs_give_identical_bytes(tmp_path):
    args = ["elliptic", "--model", "hyperbolic", "--dim", "2", "--rmax", "22", "--T", "1"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    fa, fb = _files(a), _files(b)
    assert fa.keys() == fb.keys() == {"elliptic.csv", "elliptic.json", "manifest.json"}
    assert fa == fb


def test_barrier_command(tmp_path):
    out = tmp_path / "b"
    code = main(["barrier", "--model", "hyperbolic", "--alpha", "3.5", "--r0", "2", "--rmax", "60",
                 "--K", "0.2", "--T", "0.2", "--C2", "1", "--R0", "3", "--out", str(out)])
    assert code == EXIT_OK
    rep = json.loads((out / "barrier.json").read_text())
    assert rep["w_barrier"]["pass"] and rep["backward_barrier"]["pass"]


def test_barrier_broken_constraint_fails(tmp_path):
    code = main(["barrier", "--rmax", "40", "--K", "1.5", "--T", "0.1", "--C2", "1",
                 "--out", str(tmp_path)])
    assert code == EXIT_VERIFY
    rep = json.loads((tmp_path / "barrier.json").read_text())
    assert rep["backward_barrier"]["margin"] < 0


def test_pme_barenblatt(tmp_path):
    assert main(["pme", "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "pme.json").read_text())
    assert rep["max_mass_residual"] <= 1e-9 and rep["linf_error"] < 0.05
    head = (tmp_path / "snapshots.csv").read_text().splitlines()[0]
    assert head == "t,r,u"


def test_pme_unknown_data(tmp_path):
    assert main(["pme", "--data", "gaussian", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_uniq_supercritical_fails(tmp_path):
    code = main(["uniq", "--data", "supercritical", "--R", "4", "--t-end", "0.1",
                 "--out", str(tmp_path)])
    assert code == EXIT_VERIFY


def test_sweep(tmp_path):
    jobs = tmp_path / "jobs.json"
    jobs.write_text(json.dumps({"e": ["geom", "--rmax", "5"], "bad": ["geom", "--model", "x"]}))
    out = tmp_path / "s"
    assert main(["sweep", "--jobs", str(jobs), "--out", str(out)]) == EXIT_VERIFY
    rep = json.loads((out / "sweep.json").read_text())
    assert rep["jobs"] == {"bad": EXIT_CONFIG, "e": EXIT_OK}


def test_dumps_handles_non_finite():
    assert json.loads(dumps({"a": float("inf"), "b": float("nan")})) == {"a": "inf", "b": "nan"}
