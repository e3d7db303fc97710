"""Parameter sweeps, decay-rate fits and output files.

A sweep varies one PML or Laplace parameter and records an error metric
next to its predicted factor:

* ``mode``: per-mode TBC versus PML difference in the s-domain; the bound
  column is the coth deviation ``sum_j 2 e^{-2x_j}/(1 - e^{-2x_j})`` with
  ``x_j = sqrt(eps_j mu_j) Re(s) Ltilde_j``.
* ``time``: weighted time-domain difference
  ``||e^{-s1 t}(E_TBC - E_PML)||_{L2(0,inf; L2(strip))}`` of one mode; the
  bound column is :func:`bounds.theorem_factor`.
* ``opnorm``: symbol error operator norm of the top layer against ``M_1``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, List, Optional, Sequence

import numpy as np

from . import config as cfgmod
from .bounds import mj_bound, symbol_error_opnorm, theorem_factor
from .errors import ConfigError, DomainError, LayerwaveError
from .model import LaplaceFrequency, MediumParams, PmlConfig, stretched_thickness
from .stripsolver import (
    Grid1D,
    GridSpec,
    ModeProblem,
    Polarization,
    SourceSpec,
    Termination,
    error_chain_check,
    mode_error,
)
from .symbols import coth_minus_one, xi_lattice
from .timedomain import BromwichGrid, admissible_source, timedomain_mode_solution, weighted_l2_error

log = logging.getLogger(__name__)

__all__ = [
    "SweepSpec",
    "SweepRecord",
    "FitResult",
    "run_sweep",
    "fit_decay_rate",
    "estimate_floor",
    "predicted_slope",
    "emit_outputs",
    "load_csv",
    "source_from",
    "grid_spec_from",
    "stability_sweep",
    "CSV_HEADER",
]

CSV_HEADER = ("param", "value", "error", "bound", "walltime")
MIN_POINTS = 4


@dataclass(frozen=True)
class SweepSpec:
    """One sweep: ``parameter`` takes each of ``values`` on top of ``config``."""

    parameter: str
    values: tuple
    config: dict
    metric: str = "mode"
    fit_abscissa: str = "value"
    label: str = ""

    def __post_init__(self):
        if self.parameter not in ("L", "L1", "sigma", "sigma1", "m", "s2"):
            raise ConfigError("sweep.parameter", f"unknown sweep parameter {self.parameter!r}")
        if self.metric not in ("mode", "time", "opnorm"):
            raise ConfigError("sweep.metric", f"unknown metric {self.metric!r}")
        if self.fit_abscissa not in ("value", "ltilde", "sigmaL"):
            raise ConfigError("sweep.fit_abscissa", f"unknown abscissa {self.fit_abscissa!r}")
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ConfigError("sweep.values", "empty value list")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_config(cls, cfg: dict, series_value: Optional[float] = None) -> "SweepSpec":
        """Build the sweep described by ``cfg['sweep']``; ``series_value``
        fixes the PML strength (both layers) for one curve of a family."""
        sw = cfg["sweep"]
        base = json.loads(json.dumps(cfg))
        label = ""
        if series_value is not None:
            base["pml"]["sigma1"] = base["pml"]["sigma2"] = float(series_value)
            label = f"sigma={series_value:g}"
        return cls(sw["parameter"], tuple(sw["values"]), base, sw["metric"], sw["fit_abscissa"], label)


@dataclass
class SweepRecord:
    param: str
    value: float
    error: float
    bound: float
    walltime: float
    abscissa: float
    status: str = "ok"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status == "ok" and not (self.error >= 0.0):
            raise DomainError("measured error must be nonnegative")


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float
    predicted: Optional[float]
    relative_deviation: Optional[float]
    used: int
    floor: Optional[float]


# --------------------------------------------------------------------------
# config helpers
# --------------------------------------------------------------------------


def source_from(cfg: dict) -> SourceSpec:
    src = cfg["source"]
    g = tuple(src["g"])
    if src["kind"] == "zero":
        return SourceSpec.zero()
    if src["kind"] == "box":
        return SourceSpec.box(src["lo"], src["hi"], g, src["height"])
    return SourceSpec.hat(src["lo"], src["peak"], src["hi"], g, src["height"])


def grid_spec_from(cfg: dict, with_pml: bool = False) -> GridSpec:
    g = cfg["grid"]
    if with_pml:
        return GridSpec(g["n_top"], g["n_bot"], g["n_pml1"], g["n_pml2"], g["cluster"])
    return GridSpec(g["n_top"], g["n_bot"], 0, 0, g["cluster"])


def _apply(cfg: dict, parameter: str, value: float) -> dict:
    out = json.loads(json.dumps(cfg))
    p = out["pml"]
    if parameter == "L":
        p["L1"] = p["L2"] = value
    elif parameter == "L1":
        p["L1"] = value
    elif parameter == "sigma":
        p["sigma1"] = p["sigma2"] = value
    elif parameter == "sigma1":
        p["sigma1"] = value
    elif parameter == "m":
        if value != int(value):
            raise ConfigError("sweep.values", "profile exponent must be an integer")
        p["m"] = int(value)
    elif parameter == "s2":
        out["laplace"]["s2"] = value
    return out


def _abscissa(kind: str, value: float, pml: PmlConfig) -> float:
    if kind == "ltilde":
        return stretched_thickness(1, pml)
    if kind == "sigmaL":
        return pml.sigma1 * pml.L1
    return value


def predicted_slope(spec: SweepSpec) -> Optional[float]:
    """Predicted slope of ``log(error)`` against the fit abscissa, or
    ``None`` when the sweep is not a decay study."""
    media = cfgmod.media_from(spec.config)
    em = media.eps_mu(1)
    pml = cfgmod.pml_from(spec.config)
    if spec.fit_abscissa == "ltilde":
        s1 = spec.config["laplace"]["s1"]
        return -2.0 * math.sqrt(em) * s1
    if spec.fit_abscissa == "sigmaL":
        # exponent sqrt(eps mu) sigma L for the linear profile, 2 sqrt(eps mu) Lbar in general
        return -math.sqrt(em) * 2.0 / (pml.m + 1)
    return None


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------


def _metric_mode(cfg: dict):
    media = cfgmod.media_from(cfg)
    geo = cfgmod.geometry_from(cfg)
    pml = cfgmod.pml_from(cfg)
    s = cfgmod.laplace_from(cfg)
    m = cfg["mode"]
    pol = Polarization(m["polarization"])
    src = source_from(cfg)
    spec = grid_spec_from(cfg)
    err = mode_error((m["xi1"], m["xi2"]), s, media, geo, pml, src, pol, spec)
    bound = 0.0
    for j in (1, 2):
        x = math.sqrt(media.eps_mu(j)) * s.s1 * stretched_thickness(j, pml)
        bound += abs(coth_minus_one(x))
    extra = {}
    if pol is Polarization.TE and abs(pml.s1 - s.s1) <= 1e-12 * s.s1:
        grid = Grid1D.build(geo, spec)
        chain = error_chain_check(ModeProblem((m["xi1"], m["xi2"]), s, pol, Termination.TBC, src, grid, media, pml))
        extra = {"chain_form": chain.form, "chain_bound": chain.bound, "chain_holds": chain.holds}
    return err, bound, extra


def _metric_time(cfg: dict):
    media = cfgmod.media_from(cfg)
    geo = cfgmod.geometry_from(cfg)
    pml = cfgmod.pml_from(cfg)
    tcfg = cfg["time"]
    s1 = cfg["laplace"]["s1"]
    m = cfg["mode"]
    params = {"a": tcfg["a"], "omega0": tcfg["omega0"]} if tcfg["profile"] == "damped-sine" else {}
    source = admissible_source(tcfg["profile"], tcfg["T"], **params)
    bgrid = BromwichGrid(s1, tcfg["S"], tcfg["count"])
    grid = Grid1D.build(geo, grid_spec_from(cfg))
    src = source_from(cfg)
    base = ModeProblem((m["xi1"], m["xi2"]), complex(s1, 0.0), m["polarization"], Termination.TBC, src, grid, media, pml)
    a = timedomain_mode_solution(base, source, bgrid, t_max=tcfg["t_window"])
    b = timedomain_mode_solution(base.with_(termination=Termination.PML_SYMBOL), source, bgrid, t_max=tcfg["t_window"])
    err = weighted_l2_error(a, b, s1)
    return err, theorem_factor(media, pml), {"pre_onset_ratio": max(a.meta["pre_onset_ratio"], b.meta["pre_onset_ratio"])}


def _metric_opnorm(cfg: dict):
    media = cfgmod.media_from(cfg)
    pml = cfgmod.pml_from(cfg)
    s = cfgmod.laplace_from(cfg)
    lat = cfg["lattice"]
    j = cfg["mode"]["layer"]
    lattice = xi_lattice(lat["extent"], lat["n"])
    return symbol_error_opnorm(lattice, s, j, media, pml), mj_bound(s, j, media, pml), {}


_METRICS = {"mode": _metric_mode, "time": _metric_time, "opnorm": _metric_opnorm}


def _run_point(spec: SweepSpec, value: float) -> SweepRecord:
    start = time.perf_counter()
    try:
        cfg = _apply(spec.config, spec.parameter, value)
        pml = cfgmod.pml_from(cfg)
        absc = _abscissa(spec.fit_abscissa, value, pml)
        err, bound, extra = _METRICS[spec.metric](cfg)
        status = "ok"
    except (LayerwaveError, ArithmeticError, ValueError) as exc:
        log.warning("sweep point %s=%g failed: %s", spec.parameter, value, exc)
        err, bound, extra, status, absc = math.nan, math.nan, {}, f"error: {exc}", math.nan
    return SweepRecord(spec.parameter, value, float(err), float(bound), time.perf_counter() - start, float(absc),
                       status, extra)


def run_sweep(spec: SweepSpec, threads: int = 1) -> List[SweepRecord]:
    """Evaluate every sweep point; failures are recorded and the sweep goes on.

    Points run in parallel when ``threads > 1``; records are returned sorted
    by parameter value so output order is deterministic.
    """
    values = sorted(spec.values)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda v: _run_point(spec, v), values))
    else:
        records = [_run_point(spec, v) for v in values]
    return records


# --------------------------------------------------------------------------
# fitting
# --------------------------------------------------------------------------


def estimate_floor(records: Sequence[SweepRecord]) -> Optional[float]:
    """Mean error of the two largest abscissae when they differ by less
    than a factor 1.5 (a plateau), else ``None``."""
    ok = sorted((r for r in records if r.status == "ok" and math.isfinite(r.abscissa)), key=lambda r: r.abscissa)
    if len(ok) < 2:
        return None
    a, b = ok[-2].error, ok[-1].error
    if a <= 0.0 or b <= 0.0:
        return max(a, b)
    if max(a, b) / min(a, b) < 1.5:
        return 0.5 * (a + b)
    return None


def fit_decay_rate(records: Sequence[SweepRecord], predicted: Optional[float] = None) -> FitResult:
    """Least-squares line through ``(abscissa, log error)``.

    Points within ten times the discretisation floor are excluded. Needs
    at least four usable points.
    """
    floor = estimate_floor(records)
    usable = [r for r in records if r.status == "ok" and math.isfinite(r.abscissa) and r.error > 0.0]
    if floor is not None:
        usable = [r for r in usable if r.error >= 10.0 * floor]
    if len(usable) < MIN_POINTS:
        raise DomainError(f"need at least {MIN_POINTS} points above the floor, got {len(usable)}")
    x = np.array([r.abscissa for r in usable])
    y = np.log(np.array([r.error for r in usable]))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    dev = None if predicted is None else float(abs(slope - predicted) / abs(predicted))
    return FitResult(float(slope), float(intercept), r2, predicted, dev, len(usable), floor)


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _csv_text(records: Sequence[SweepRecord], timing: bool) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([r.param, _fmt(r.value), _fmt(r.error), _fmt(r.bound), _fmt(r.walltime) if timing else ""])
    return buf.getvalue()


def load_csv(path: str) -> List[dict]:
    """Read a sweep CSV back; floats round-trip exactly."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise DomainError(f"{path}: not a sweep CSV")
    out = []
    for row in rows[1:]:
        out.append({
            "param": row[0],
            "value": float(row[1]),
            "error": float(row[2]),
            "bound": float(row[3]),
            "walltime": float(row[4]) if row[4] else None,
        })
    return out


def _plot_script(csv_name: str, stem: str, param: str) -> str:
    return "\n".join([
        "# gnuplot script: error and predicted factor against the swept parameter",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set logscale y",
        f"set xlabel '{param}'",
        "set ylabel 'error'",
        "set format y '%g'",
        f"set terminal pngcairo size 800,600",
        f"set output '{stem}.png'",
        f"plot '{csv_name}' using 2:3 with linespoints title 'measured', \\",
        f"     '{csv_name}' using 2:4 with lines dashtype 2 title 'bound'",
        "",
    ])


def _jsonable(x: Any):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def emit_outputs(records: Sequence[SweepRecord], fit: Optional[FitResult], spec: SweepSpec, out_dir: str,
                 seed: int = 0, stem: str = "sweep", timing: bool = False) -> dict:
    """Write ``<stem>.csv``, ``<stem>.json`` and ``<stem>.gp`` into ``out_dir``.

    The wall-time column is left empty unless ``timing`` is set, so that
    identical configurations give byte-identical CSV files. Returns the
    paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {k: os.path.join(out_dir, f"{stem}.{ext}") for k, ext in (("csv", "csv"), ("json", "json"), ("plot", "gp"))}
    with open(paths["csv"], "w", encoding="utf-8", newline="") as fh:
        fh.write(_csv_text(records, timing))
    summary = {
        "schema_version": cfgmod.SCHEMA_VERSION,
        "config_hash": cfgmod.config_hash(spec.config),
        "config": spec.config,
        "seed": seed,
        "parameter": spec.parameter,
        "metric": spec.metric,
        "label": spec.label,
        "fit": None if fit is None else asdict(fit),
        "records": [
            {"value": r.value, "abscissa": r.abscissa, "error": r.error, "bound": r.bound, "status": r.status,
             "extra": r.extra}
            for r in records
        ],
    }
    with open(paths["json"], "w", encoding="utf-8") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(paths["plot"], "w", encoding="utf-8") as fh:
        fh.write(_plot_script(os.path.basename(paths["csv"]), stem, spec.parameter))
    return paths


# --------------------------------------------------------------------------
# stability monitoring
# --------------------------------------------------------------------------


def stability_sweep(cfg: dict, s2_values: Sequence[float], with_pml: bool = True):
    """Stability ratios of the TBC (and PML) mode solutions along a line of
    ``s2`` values. Returns ``(ratios_tbc, ratios_pml)`` arrays."""
    from .stripsolver import solve_mode, stability_ratios

    media = cfgmod.media_from(cfg)
    geo = cfgmod.geometry_from(cfg)
    pml = cfgmod.pml_from(cfg)
    m = cfg["mode"]
    s1 = cfg["laplace"]["s1"]
    src = source_from(cfg)
    grid = Grid1D.build(geo, grid_spec_from(cfg))
    r_tbc, r_pml = [], []
    for s2 in s2_values:
        s = LaplaceFrequency(s1, float(s2))
        base = ModeProblem((m["xi1"], m["xi2"]), s, m["polarization"], Termination.TBC, src, grid, media, pml)
        a = solve_mode(base)
        b = solve_mode(base.with_(termination=Termination.PML_SYMBOL)) if with_pml else None
        ra, rb = stability_ratios(a, b)
        r_tbc.append(ra)
        r_pml.append(rb)
    return np.array(r_tbc), np.array(r_pml)
