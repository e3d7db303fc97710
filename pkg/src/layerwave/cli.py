"""Command-line entry point.

Subcommands: ``bound``, ``symbol-error``, ``solve-mode``, ``solve-strip``,
``time-solve``, ``sweep`` and ``verify``. Exit codes: 0 success, 1 invalid
input or configuration, 2 numerical failure (or a failed verification),
64 usage error.

Every run that gets past argument parsing writes one ``manifest.json`` in
the output directory.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from . import config as cfgmod
from .errors import ConfigError, DomainError, LayerwaveError, NumericalError

log = logging.getLogger("layerwave")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2
EXIT_USAGE = 64

# environment variables for the global flags (section keys use LAYERWAVE_<SECTION>__<KEY>)
_ENV_FLAGS = {"config": "CONFIG", "seed": "SEED", "out": "OUT", "threads": "THREADS", "preset": "PRESET"}


def _fmt(x) -> str:
    return format(float(x), ".17g")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Usage problems raise instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


@dataclass
class RunManifest:
    subcommand: str
    seed: Optional[int]
    config_hash: Optional[str]
    schema_version: int = cfgmod.SCHEMA_VERSION
    version: str = __version__
    started: str = ""
    finished: str = ""
    exit_code: Optional[int] = None
    outputs: List[str] = field(default_factory=list)
    error: Optional[str] = None

    def write(self, out_dir: str) -> str:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    # SUPPRESS lets the flags appear before or after the subcommand
    p = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    p.add_argument("--config", metavar="PATH", default=S, help="JSON config file")
    p.add_argument("--seed", metavar="N", default=S, help="RNG seed")
    p.add_argument("--out", metavar="DIR", default=S, help="output directory (default: out)")
    p.add_argument("--threads", metavar="N", default=S, help="worker threads")
    p.add_argument("--preset", metavar="NAME", default=S, help=f"one of {', '.join(sorted(cfgmod.PRESETS))}")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--quiet", action="store_const", dest="verbosity", const=0, default=S)
    g.add_argument("--debug", action="store_const", dest="verbosity", const=2, default=S)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="layerwave", description="PML truncation and EtM error bounds for layered media",
                     parents=[common])
    parser.add_argument("--version", action="version", version=f"layerwave {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("bound", parents=[common], help="print one bound report row")
    p.add_argument("--s1", type=float, help="Re s (default laplace.s1)")
    p.add_argument("--s2", type=float, help="Im s (default laplace.s2)")
    p.add_argument("--layer", type=int, choices=(1, 2), help="layer index (default mode.layer)")
    p.add_argument("--measure", action="store_true", help="add the lattice operator-norm error")
    p.add_argument("--header", action="store_true", help="print a header line first")

    p = sub.add_parser("symbol-error", parents=[common], help="operator-norm error of the PML symbol on a lattice")
    p.add_argument("--s1", type=float)
    p.add_argument("--s2", type=float)
    p.add_argument("--layer", type=int, choices=(1, 2))
    p.add_argument("--header", action="store_true")

    for name, text in (("solve-mode", "solve one transverse mode"), ("time-solve", "time-domain mode solve")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--xi1", type=float)
        p.add_argument("--xi2", type=float)
        p.add_argument("--polarization", choices=("TE", "TM"))
        if name == "solve-mode":
            p.add_argument("--termination", choices=("TBC", "PML_SYMBOL", "PML_LAYER"))
            p.add_argument("--s1", type=float)
            p.add_argument("--s2", type=float)

    p = sub.add_parser("solve-strip", parents=[common], help="solve every lattice mode and synthesise the field")
    p.add_argument("--termination", choices=("TBC", "PML_SYMBOL", "PML_LAYER"))
    p.add_argument("--s1", type=float)
    p.add_argument("--s2", type=float)

    p = sub.add_parser("sweep", parents=[common], help="convergence sweep with rate fit")
    p.add_argument("--parameter", choices=("L", "L1", "sigma", "sigma1", "m", "s2"))
    p.add_argument("--values", type=float, nargs="+")
    p.add_argument("--metric", choices=("mode", "time", "opnorm"))
    p.add_argument("--series", type=float, nargs="*", help="PML strengths, one curve each")
    p.add_argument("--timing", action="store_true", help="fill the walltime column")

    p = sub.add_parser("verify", parents=[common], help="run the invariant suites")
    p.add_argument("suite", nargs="?", default="all")
    p.add_argument("--full", action="store_true", help="full sample sizes")
    return parser


# --------------------------------------------------------------------------
# config resolution
# --------------------------------------------------------------------------


def _int_setting(name, raw):
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected an integer, got {raw!r}") from None


def _settings(args, environ):
    """Global settings: flags win over ``LAYERWAVE_*`` variables."""
    out = {}
    for key, env in _ENV_FLAGS.items():
        val = getattr(args, key, None)
        if val is None:
            val = environ.get(cfgmod.ENV_PREFIX + env)
        out[key] = val
    for key in ("seed", "threads"):
        if out[key] is not None:
            out[key] = _int_setting(key, out[key])
    out["out"] = out["out"] or "out"
    return out


def _overrides(args, settings) -> dict:
    over: dict = {}

    def put(section, key, value):
        if value is not None:
            over.setdefault(section, {})[key] = value

    if settings["seed"] is not None:
        over["seed"] = settings["seed"]
    if settings["threads"] is not None:
        over["threads"] = settings["threads"]
    put("laplace", "s1", getattr(args, "s1", None))
    put("laplace", "s2", getattr(args, "s2", None))
    put("mode", "layer", getattr(args, "layer", None))
    put("mode", "xi1", getattr(args, "xi1", None))
    put("mode", "xi2", getattr(args, "xi2", None))
    put("mode", "polarization", getattr(args, "polarization", None))
    put("mode", "termination", getattr(args, "termination", None))
    put("sweep", "parameter", getattr(args, "parameter", None))
    put("sweep", "values", getattr(args, "values", None))
    put("sweep", "metric", getattr(args, "metric", None))
    put("sweep", "series", getattr(args, "series", None))
    return over


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _cmd_bound(args, cfg, out_dir, outputs):
    from .bounds import bound_report
    from .symbols import xi_lattice

    media, pml, s = cfgmod.media_from(cfg), cfgmod.pml_from(cfg), cfgmod.laplace_from(cfg)
    lattice = xi_lattice(cfg["lattice"]["extent"], cfg["lattice"]["n"]) if args.measure else None
    r = bound_report(s.value, cfg["mode"]["layer"], media, pml, lattice)
    header = ["s1", "s2", "regime", "lambda", "gamma", "m_bound", "measured_opnorm"]
    row = [_fmt(r.s1), _fmt(r.s2), r.regime.value, _fmt(r.lambda_val), _fmt(r.gamma_val), _fmt(r.m_bound),
           "" if r.measured_opnorm is None else _fmt(r.measured_opnorm)]
    if r.measured_opnorm is not None and not r.holds:
        log.warning("measured operator norm exceeds M_%d", r.layer)
    if args.header:
        print(",".join(header))
    print(",".join(row))
    return EXIT_OK


def _cmd_symbol_error(args, cfg, out_dir, outputs):
    from .bounds import mj_bound, symbol_error_opnorm
    from .symbols import xi_lattice

    media, pml, s = cfgmod.media_from(cfg), cfgmod.pml_from(cfg), cfgmod.laplace_from(cfg)
    j = cfg["mode"]["layer"]
    lattice = xi_lattice(cfg["lattice"]["extent"], cfg["lattice"]["n"])
    err = symbol_error_opnorm(lattice, s.value, j, media, pml)
    bound = mj_bound(s.value, j, media, pml)
    if args.header:
        print("s1,s2,layer,opnorm,m_bound,holds")
    print(",".join([_fmt(s.s1), _fmt(s.s2), str(j), _fmt(err), _fmt(bound), str(err <= bound + 1e-10).lower()]))
    return EXIT_OK


def _mode_problem(cfg, termination=None):
    from .harness import grid_spec_from, source_from
    from .stripsolver import Grid1D, ModeProblem, Termination

    m = cfg["mode"]
    term = Termination(termination or m["termination"])
    pml = cfgmod.pml_from(cfg)
    layer = term is Termination.PML_LAYER
    grid = Grid1D.build(cfgmod.geometry_from(cfg), grid_spec_from(cfg, with_pml=layer), pml if layer else None)
    return ModeProblem((m["xi1"], m["xi2"]), cfgmod.laplace_from(cfg), m["polarization"], term, source_from(cfg),
                       grid, cfgmod.media_from(cfg), pml)


def _complex_cols(z):
    return [c for v in z for c in (_fmt(v.real), _fmt(v.imag))]


def _cmd_solve_mode(args, cfg, out_dir, outputs):
    from .stripsolver import quadratic_form, solve_mode

    prob = _mode_problem(cfg)
    sol = solve_mode(prob)
    log.debug("mode %s residual %.3e", prob.xi.as_array(), sol.residual)
    e = sol.e_field()
    path = os.path.join(out_dir, "mode.csv")
    header = ["x3", "re_u", "im_u", "re_E1", "im_E1", "re_E2", "im_E2", "re_E3", "im_E3"]
    rows = [[_fmt(x)] + _complex_cols([u]) + _complex_cols(ev) for x, u, ev in zip(sol.grid.x, sol.values, e)]
    _write_csv(path, header, rows)
    outputs.append(path)
    q = quadratic_form(sol)
    print("termination,polarization,nodes,residual,re_form,im_form")
    print(",".join([prob.termination.value, prob.polarization.value, str(sol.grid.n), _fmt(sol.residual),
                    _fmt(q.real), _fmt(q.imag)]))
    return EXIT_OK


def _cmd_solve_strip(args, cfg, out_dir, outputs):
    from .harness import grid_spec_from, source_from
    from .stripsolver import Termination, assemble_field, solve_strip
    from .symbols import xi_lattice

    term = Termination(cfg["mode"]["termination"])
    lattice = xi_lattice(cfg["lattice"]["extent"], cfg["lattice"]["n"])
    sol = solve_strip(lattice, cfgmod.laplace_from(cfg), lambda a, b: np.exp(-0.5 * (a * a + b * b)),
                      source_from(cfg), cfgmod.geometry_from(cfg), cfgmod.media_from(cfg), cfgmod.pml_from(cfg),
                      term, grid_spec_from(cfg, with_pml=term is Termination.PML_LAYER), cfg["threads"])
    field_ = assemble_field(lattice, sol.fields, [(0.0, 0.0)])[0]
    path = os.path.join(out_dir, "strip.csv")
    header = ["x3", "re_E1", "im_E1", "re_E2", "im_E2", "re_E3", "im_E3"]
    _write_csv(path, header, [[_fmt(x)] + _complex_cols(ev) for x, ev in zip(sol.grid.x, field_)])
    outputs.append(path)
    print("termination,modes,nodes,max_abs_E")
    print(",".join([term.value, str(len(lattice)), str(sol.grid.n), _fmt(np.abs(field_).max())]))
    return EXIT_OK


def _cmd_time_solve(args, cfg, out_dir, outputs):
    from .stripsolver import Termination
    from .timedomain import BromwichGrid, admissible_source, timedomain_mode_solution, weighted_l2_error

    t = cfg["time"]
    s1 = cfg["laplace"]["s1"]
    params = {"a": t["a"], "omega0": t["omega0"]} if t["profile"] == "damped-sine" else {}
    source = admissible_source(t["profile"], t["T"], **params)
    grid = BromwichGrid(s1, t["S"], t["count"])
    base = _mode_problem(cfg, Termination.TBC)
    tbc = timedomain_mode_solution(base, source, grid, t_max=t["t_window"])
    pml = timedomain_mode_solution(base.with_(termination=Termination.PML_SYMBOL), source, grid,
                                   t_max=t["t_window"])
    probes = list(t["probes"])
    a, b = tbc.probe(probes), pml.probe(probes)
    path = os.path.join(out_dir, "time.csv")
    header = ["t"] + [f"{k}@{p:g}" for p in probes for k in ("tbc", "pml")]
    rows = [[_fmt(tk)] + [_fmt(v) for pair in zip(ra.real, rb.real) for v in pair] for tk, ra, rb in zip(tbc.t, a, b)]
    _write_csv(path, header, rows)
    err = weighted_l2_error(tbc, pml, s1)
    diag = {
        "weighted_l2_error": err,
        "tbc": {k: v for k, v in tbc.meta.items() if np.isscalar(v)},
        "pml": {k: v for k, v in pml.meta.items() if np.isscalar(v)},
        "grid": {"s1": s1, "S": t["S"], "count": t["count"]},
    }
    jpath = os.path.join(out_dir, "time.json")
    with open(jpath, "w", encoding="utf-8") as fh:
        json.dump(diag, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    outputs += [path, jpath]
    print("samples,weighted_l2_error")
    print(f"{len(tbc.t)},{_fmt(err)}")
    return EXIT_OK


def _cmd_sweep(args, cfg, out_dir, outputs):
    from .harness import SweepSpec, emit_outputs, fit_decay_rate, predicted_slope, run_sweep

    series = cfg["sweep"]["series"] or [None]
    print("label,slope,predicted,relative_deviation,r2,used")
    for value in series:
        spec = SweepSpec.from_config(cfg, value)
        records = run_sweep(spec, cfg["threads"])
        fit = None
        try:
            fit = fit_decay_rate(records, predicted_slope(spec))
        except DomainError as exc:
            log.warning("%s: no fit (%s)", spec.label or "sweep", exc)
        stem = "sweep" if value is None else f"sweep_sigma{value:g}"
        paths = emit_outputs(records, fit, spec, out_dir, cfg["seed"], stem, args.timing)
        outputs += list(paths.values())
        for r in records:
            log.info("%s=%g error=%.6e bound=%.6e %s", r.param, r.value, r.error, r.bound, r.status)
        if fit is None:
            print(f"{spec.label or 'sweep'},,,,,")
        else:
            pred = "" if fit.predicted is None else _fmt(fit.predicted)
            dev = "" if fit.relative_deviation is None else _fmt(fit.relative_deviation)
            print(f"{spec.label or 'sweep'},{_fmt(fit.slope)},{pred},{dev},{_fmt(fit.r2)},{fit.used}")
    return EXIT_OK


def _cmd_verify(args, cfg, out_dir, outputs):
    from .checks import SUITES, run_suite

    if args.suite != "all" and args.suite not in SUITES:
        raise ConfigError("suite", f"unknown suite {args.suite!r}; choose from {['all', *SUITES]}")
    results = run_suite(args.suite, seed=cfg["seed"], quick=not args.full)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["status", "suite", "check", "measured", "threshold"])
    for r in results:
        w.writerow(["PASS" if r.passed else "FAIL", r.suite, r.name, _fmt(r.measured), _fmt(r.threshold)])
        if r.detail:
            log.info("%s/%s: %s", r.suite, r.name, r.detail)
    sys.stdout.write(buf.getvalue())
    path = os.path.join(out_dir, "verify.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())
    outputs.append(path)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} passed")
    return EXIT_OK if failed == 0 else EXIT_NUMERICAL


_COMMANDS = {
    "bound": _cmd_bound,
    "symbol-error": _cmd_symbol_error,
    "solve-mode": _cmd_solve_mode,
    "solve-strip": _cmd_solve_strip,
    "time-solve": _cmd_time_solve,
    "sweep": _cmd_sweep,
    "verify": _cmd_verify,
}


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _setup_logging(verbosity: int):
    level = {0: logging.WARNING, 1: logging.INFO, 2: logging.DEBUG}[verbosity]
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("layerwave")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False


def dispatch(argv: Optional[Sequence[str]] = None, environ=None) -> int:
    """Parse ``argv``, run the subcommand and return the exit code."""
    environ = os.environ if environ is None else environ
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(str(exc))
        return EXIT_USAGE
    _setup_logging(getattr(args, "verbosity", 1))

    manifest = RunManifest(args.command, None, None, started=_now())
    # the output directory needs no validation, so it is known even when other settings fail
    out_dir = getattr(args, "out", None) or environ.get(cfgmod.ENV_PREFIX + "OUT") or "out"
    code = EXIT_OK
    try:
        settings = _settings(args, environ)
        out_dir = settings["out"]
        cfg = cfgmod.resolve_config(cfgmod.load_config(settings["config"]), settings["preset"],
                                    _overrides(args, settings), environ)
        manifest.seed = cfg["seed"]
        manifest.config_hash = cfgmod.config_hash(cfg)
        os.makedirs(out_dir, exist_ok=True)
        code = _COMMANDS[args.command](args, cfg, out_dir, manifest.outputs)
    except (ConfigError, DomainError) as exc:
        log.error("%s", exc)
        manifest.error = str(exc)
        code = EXIT_INPUT
    except (NumericalError, LayerwaveError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        manifest.error = str(exc)
        code = EXIT_NUMERICAL
    except OSError as exc:
        log.error("%s", exc)
        manifest.error = str(exc)
        code = EXIT_INPUT
    manifest.exit_code = code
    manifest.finished = _now()
    try:
        manifest.write(out_dir)
    except OSError as exc:
        log.error("could not write manifest: %s", exc)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
