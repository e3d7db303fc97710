import json
import math
import os

import numpy as np
import pytest

from layerwave import config as cfgmod
from layerwave.bounds import theorem_factor
from layerwave.errors import ConfigError, DomainError
from layerwave.harness import (
    CSV_HEADER,
    SweepRecord,
    SweepSpec,
    emit_outputs,
    estimate_floor,
    fit_decay_rate,
    load_csv,
    predicted_slope,
    run_sweep,
    stability_sweep,
)


def records(xs, ys, param="L"):
    return [SweepRecord(param, float(x), float(y), 0.0, 0.0, float(x)) for x, y in zip(xs, ys)]


def mode_cfg(**sweep):
    cfg = cfgmod.resolve_config(preset="mode-decay", environ={})
    cfg["sweep"].update(sweep)
    return cfg


# ---------------------------------------------------------------- fitting


def test_fit_exact_exponential():
    x = np.linspace(0.0, 3.0, 7)
    fit = fit_decay_rate(records(x, 3 * np.exp(-2 * x)), predicted=-2.0)
    assert fit.slope == pytest.approx(-2.0, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3), abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert fit.relative_deviation < 1e-12
    assert fit.floor is None and fit.used == 7


def test_plateau_points_are_excluded():
    x = np.arange(1.0, 10.0)
    y = np.maximum(np.exp(-3 * x), 1e-10)
    floor = estimate_floor(records(x, y))
    assert floor == pytest.approx(1e-10)
    fit = fit_decay_rate(records(x, y))
    assert fit.slope == pytest.approx(-3.0, abs=1e-12)
    # only points at least ten times above the floor are kept
    assert fit.used == int(np.sum(y >= 1e-9))


def test_too_few_usable_points():
    with pytest.raises(DomainError):
        fit_decay_rate(records([1, 2, 3], [1.0, 0.1, 0.01]))
    bad = records([1, 2, 3, 4, 5], [1.0, 0.1, 0.01, 1e-3, 1e-4])
    bad[0].status = "error: boom"
    with pytest.raises(DomainError):
        fit_decay_rate(bad[:4])


def test_negative_error_is_rejected():
    with pytest.raises(DomainError):
        SweepRecord("L", 1.0, -1e-3, 0.0, 0.0, 1.0)


# ---------------------------------------------------------------- sweeps


def test_empty_value_list():
    with pytest.raises(ConfigError, match="sweep.values"):
        SweepSpec("L", (), mode_cfg())


def test_unknown_parameter_and_metric():
    with pytest.raises(ConfigError, match="sweep.parameter"):
        SweepSpec("eps", (1.0,), mode_cfg())
    with pytest.raises(ConfigError, match="sweep.metric"):
        SweepSpec("L", (1.0,), mode_cfg(), metric="energy")


def test_mode_sweep_over_L_is_strictly_decreasing():
    cfg = mode_cfg()
    cfg["pml"].update(sigma1=2.0, sigma2=2.0, L2=1.0)
    # sigma L in [1, 5]
    spec = SweepSpec("L", (0.5, 1.0, 1.5, 2.0, 2.5), cfg, metric="mode", fit_abscissa="sigmaL")
    recs = run_sweep(spec)
    errs = [r.error for r in recs]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert all(r.extra.get("chain_holds") for r in recs)


def test_mode_sweep_slope_and_parallel_determinism():
    cfg = mode_cfg()
    spec = SweepSpec.from_config(cfg)
    one = run_sweep(spec, threads=1)
    many = run_sweep(spec, threads=4)
    assert [r.error for r in one] == [r.error for r in many]
    fit = fit_decay_rate(one, predicted_slope(spec))
    assert fit.relative_deviation <= 0.10 and fit.r2 >= 0.999


def test_floor_is_reported_for_very_thick_layers():
    cfg = mode_cfg()
    cfg["grid"].update(n_top=20, n_bot=20)
    spec = SweepSpec("sigma1", (2, 4, 6, 8, 40, 60, 80, 100), cfg, metric="mode", fit_abscissa="ltilde")
    recs = run_sweep(spec)
    floor = estimate_floor(recs)
    assert floor is not None and floor < 1e-12
    fit = fit_decay_rate(recs, predicted_slope(spec))
    # plateau points (zero error once the coth factor underflows) are left out of the fit
    assert fit.used == sum(1 for r in recs if r.error > 10 * floor and r.error > 0)
    assert fit.used < len(recs)
    assert fit.relative_deviation <= 0.10


def test_failed_point_is_recorded_and_sweep_continues():
    cfg = mode_cfg()
    spec = SweepSpec("sigma1", (2.0, -1.0, 3.0), cfg, metric="mode", fit_abscissa="ltilde")
    recs = run_sweep(spec)
    assert [r.status == "ok" for r in recs] == [False, True, True]
    assert math.isnan(recs[0].error) and "sigma1" in recs[0].status


def test_opnorm_sweep_stays_below_its_bound():
    cfg = mode_cfg()
    cfg["lattice"].update(n=17)
    recs = run_sweep(SweepSpec("s2", (-10.0, -1.0, 0.0, 3.0, 15.0), cfg, metric="opnorm"))
    assert all(r.error <= r.bound + 1e-10 for r in recs)


def test_stability_sweep_is_bounded():
    cfg = mode_cfg()
    r, rp = stability_sweep(cfg, np.linspace(-50, 50, 21))
    assert np.max(r) / np.median(r) < 100 and np.max(rp) / np.median(rp) < 100


# ---------------------------------------------------------------- outputs


def _small_time_spec():
    cfg = cfgmod.resolve_config(preset="paper-repro", environ={})
    cfg["grid"].update(n_top=10, n_bot=10)
    cfg["time"].update(count=1024, t_window=40.0, S=20.0)
    return SweepSpec("L", (0.5, 1.0, 1.5, 2.0), cfg, metric="time", fit_abscissa="sigmaL")


def test_emit_outputs_roundtrip_hash_and_bound_column(tmp_path):
    spec = _small_time_spec()
    recs = run_sweep(spec)
    fit = fit_decay_rate(recs, predicted_slope(spec))
    paths = emit_outputs(recs, fit, spec, str(tmp_path), seed=7)
    rows = load_csv(paths["csv"])
    assert [r["error"] for r in rows] == [r.error for r in recs]
    assert [r["value"] for r in rows] == [r.value for r in recs]
    assert all(r["walltime"] is None for r in rows)
    for row in rows:
        pml = cfgmod.pml_from({**spec.config, "pml": {**spec.config["pml"], "L1": row["value"], "L2": row["value"]}})
        assert row["bound"] == theorem_factor(cfgmod.media_from(spec.config), pml)
    summary = json.loads(open(paths["json"]).read())
    assert summary["config_hash"] == cfgmod.config_hash(spec.config)
    assert summary["seed"] == 7 and summary["fit"]["slope"] == fit.slope
    assert "set logscale y" in open(paths["plot"]).read()
    with open(paths["csv"]) as fh:
        assert fh.readline().strip() == ",".join(CSV_HEADER)


def test_identical_config_gives_identical_csv(tmp_path):
    spec = _small_time_spec()
    a = emit_outputs(run_sweep(spec), None, spec, str(tmp_path / "a"))
    b = emit_outputs(run_sweep(spec), None, spec, str(tmp_path / "b"))
    assert open(a["csv"], "rb").read() == open(b["csv"], "rb").read()
    timed = emit_outputs(run_sweep(spec), None, spec, str(tmp_path / "c"), timing=True)
    assert all(r["walltime"] > 0 for r in load_csv(timed["csv"]))


def test_load_csv_rejects_foreign_files(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(DomainError):
        load_csv(str(p))
