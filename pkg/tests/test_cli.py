import csv
import json

import pytest

import oracles
from layerwave.cli import dispatch


def run(tmp_path, capsys, *argv, env=None):
    code = dispatch(["--out", str(tmp_path / "out"), *argv], environ=env or {})
    out, err = capsys.readouterr()
    return code, out, err


def manifest(tmp_path):
    return json.loads((tmp_path / "out" / "manifest.json").read_text())


def test_bound_golden_row(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, "--quiet", "bound", "--s1", "1", "--s2", "0")
    assert code == 0
    assert out == "1,0,II.b,1,1,1.1639534137386529,\n"
    # Lbar = sigma L / (m + 1) = 1/2, Gamma = 1: M = 2 e^{-1} / (1 - e^{-1})
    assert float(out.split(",")[5]) == pytest.approx(oracles.decay_factor(1.0), rel=1e-15)
    m = manifest(tmp_path)
    assert m["subcommand"] == "bound" and m["exit_code"] == 0 and len(m["config_hash"]) == 64


def test_bound_with_measurement_and_header(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, "--quiet", "bound", "--s1", "1", "--s2", "3", "--measure", "--header")
    assert code == 0
    rows = list(csv.DictReader(out.splitlines()))
    assert float(rows[0]["measured_opnorm"]) <= float(rows[0]["m_bound"])


def test_malformed_config_names_the_key(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"pml": {"sigma1": -2}}))
    code, _, err = run(tmp_path, capsys, "--config", str(cfg), "bound")
    assert code == 1
    assert "pml.sigma1" in err
    assert manifest(tmp_path)["exit_code"] == 1


def test_environment_overrides_and_bad_values(tmp_path, capsys):
    code, _, err = run(tmp_path, capsys, "bound", env={"LAYERWAVE_PML__M": "0"})
    assert code == 1 and "pml.m" in err
    code, _, err = run(tmp_path, capsys, "bound", env={"LAYERWAVE_SEED": "abc"})
    assert code == 1 and "seed" in err
    assert "seed" in manifest(tmp_path)["error"]


def test_usage_errors_exit_64(tmp_path, capsys):
    assert run(tmp_path, capsys, "bound", "--bogus")[0] == 64
    assert run(tmp_path, capsys, "nosuchcommand")[0] == 64
    assert run(tmp_path, capsys)[0] == 64


def test_solve_mode_and_strip_write_outputs(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, "--quiet", "solve-mode", "--xi1", "1", "--termination", "PML_LAYER")
    assert code == 0
    assert (tmp_path / "out" / "mode.csv").exists()
    code, out, _ = run(tmp_path, capsys, "--quiet", "--threads", "2", "solve-strip")
    assert code == 0
    assert str(tmp_path / "out" / "strip.csv") in manifest(tmp_path)["outputs"]


def test_time_solve_outputs(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, "--quiet", "time-solve")
    assert code == 0
    diag = json.loads((tmp_path / "out" / "time.json").read_text())
    assert diag["tbc"]["pre_onset_ratio"] <= 1e-6
    header = (tmp_path / "out" / "time.csv").read_text().splitlines()[0]
    assert header.startswith("t,")


def test_sweep_is_reproducible(tmp_path, capsys):
    args = ["--quiet", "--preset", "mode-decay", "sweep"]
    assert run(tmp_path, capsys, *args)[0] == 0
    first = (tmp_path / "out" / "sweep.csv").read_bytes()
    assert run(tmp_path, capsys, *args)[0] == 0
    assert (tmp_path / "out" / "sweep.csv").read_bytes() == first


def test_verify_single_suite(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, "--quiet", "verify", "elastic")
    assert code == 0
    assert out.strip().splitlines()[-1].endswith("passed")
    assert (tmp_path / "out" / "verify.csv").exists()


@pytest.mark.slow
def test_verify_default_passes(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, "--quiet", "verify")
    assert code == 0
    assert "FAIL" not in out
