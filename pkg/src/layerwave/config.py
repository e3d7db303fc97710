"""Run configuration: JSON file, presets, environment overrides and hashing.

Precedence, lowest first: built-in defaults, preset, config file,
``LAYERWAVE_<SECTION>__<KEY>`` environment variables, command-line flags.
Every key is validated; errors name the offending dotted key.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from typing import Any, Mapping, Optional

from .errors import ConfigError, LayerwaveError
from .model import LaplaceFrequency, MediumParams, PmlConfig, StripGeometry

__all__ = [
    "SCHEMA_VERSION",
    "DEFAULTS",
    "PRESETS",
    "ENV_PREFIX",
    "load_config",
    "resolve_config",
    "config_hash",
    "canonical_json",
    "media_from",
    "geometry_from",
    "pml_from",
    "laplace_from",
]

SCHEMA_VERSION = 1
ENV_PREFIX = "LAYERWAVE_"

DEFAULTS: dict = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "threads": 1,
    "media": {"eps1": 1.0, "mu1": 1.0, "eps2": 1.0, "mu2": 1.0, "lambda_e": 1.0, "mu_e": 1.0, "rho_e": 1.0},
    "geometry": {"h1": 1.0, "h2": -1.0, "f0": 0.0},
    "pml": {"L1": 1.0, "L2": 1.0, "sigma1": 1.0, "sigma2": 1.0, "m": 1, "s1": 0.1},
    "laplace": {"s1": 0.1, "s2": 0.0},
    "mode": {"xi1": 0.0, "xi2": 0.0, "polarization": "TE", "termination": "TBC", "layer": 1},
    "grid": {"n_top": 40, "n_bot": 40, "n_pml1": 40, "n_pml2": 40, "cluster": 0.0},
    "source": {"kind": "hat", "lo": -0.5, "peak": 0.0, "hi": 0.5, "g": [0.0, 1.0, 0.0], "height": 1.0},
    "lattice": {"extent": 8.0, "n": 33},
    "time": {"T": 10.0, "profile": "damped-sine", "a": 5.0, "omega0": 1.0, "S": 40.0, "count": 4096,
             "t_window": 150.0, "probes": [0.5, 0.0, -0.5]},
    "sweep": {"parameter": "sigma", "values": [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0], "metric": "time",
              "series": [], "fit_abscissa": "sigmaL"},
}

# key -> (type checker, description)
_NUMBER = (int, float)


def _is_number(v):
    return isinstance(v, _NUMBER) and not isinstance(v, bool) and math.isfinite(float(v))


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_str(v):
    return isinstance(v, str)


def _is_number_list(v):
    return isinstance(v, list) and all(_is_number(x) for x in v)


_SCHEMA: dict = {
    "schema_version": _is_int,
    "seed": _is_int,
    "threads": _is_int,
    "media": {k: _is_number for k in DEFAULTS["media"]},
    "geometry": {k: _is_number for k in DEFAULTS["geometry"]},
    "pml": {**{k: _is_number for k in DEFAULTS["pml"]}, "m": _is_int},
    "laplace": {k: _is_number for k in DEFAULTS["laplace"]},
    "mode": {"xi1": _is_number, "xi2": _is_number, "polarization": _is_str, "termination": _is_str, "layer": _is_int},
    "grid": {"n_top": _is_int, "n_bot": _is_int, "n_pml1": _is_int, "n_pml2": _is_int, "cluster": _is_number},
    "source": {"kind": _is_str, "lo": _is_number, "peak": _is_number, "hi": _is_number, "g": _is_number_list,
               "height": _is_number},
    "lattice": {"extent": _is_number, "n": _is_int},
    "time": {"T": _is_number, "profile": _is_str, "a": _is_number, "omega0": _is_number, "S": _is_number,
             "count": _is_int, "t_window": _is_number, "probes": _is_number_list},
    "sweep": {"parameter": _is_str, "values": _is_number_list, "metric": _is_str, "series": _is_number_list,
              "fit_abscissa": _is_str},
}

_CHOICES = {
    "mode.polarization": ("TE", "TM"),
    "mode.termination": ("TBC", "PML_SYMBOL", "PML_LAYER"),
    "mode.layer": (1, 2),
    "source.kind": ("hat", "box", "zero"),
    "time.profile": ("damped-sine", "t5exp", "zero"),
    "sweep.parameter": ("L", "L1", "sigma", "sigma1", "m", "s2"),
    "sweep.metric": ("mode", "time", "opnorm"),
    "sweep.fit_abscissa": ("value", "ltilde", "sigmaL"),
}

PRESETS: dict = {
    "default": {},
    # desk-scale reproduction: unit media, linear profile, s1 = 1/T with T = 10
    "paper-repro": {
        "media": {"eps1": 1.0, "mu1": 1.0, "eps2": 1.0, "mu2": 1.0},
        "pml": {"m": 1, "s1": 0.1},
        "laplace": {"s1": 0.1},
        "time": {"T": 10.0},
        "sweep": {"parameter": "L", "values": [0.5, 1.0, 1.5, 2.0, 2.5], "metric": "time",
                  "series": [1.0, 2.0, 4.0], "fit_abscissa": "sigmaL"},
    },
    # per-mode s-domain study: Ltilde_1 = 0.5 + sigma1/4 runs over [1, 3]
    "mode-decay": {
        "pml": {"L1": 0.5, "L2": 50.0, "s1": 1.0},
        "laplace": {"s1": 1.0, "s2": 0.0},
        "grid": {"n_top": 80, "n_bot": 80},
        "sweep": {"parameter": "sigma1", "values": [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0], "metric": "mode",
                  "series": [], "fit_abscissa": "ltilde"},
    },
}


def _merge(base: dict, over: Mapping, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        dotted = f"{prefix}{key}"
        if key not in out:
            raise ConfigError(dotted, "unknown key")
        if isinstance(out[key], dict):
            if not isinstance(value, Mapping):
                raise ConfigError(dotted, "expected an object")
            out[key] = _merge(out[key], value, dotted + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _validate(cfg: dict, schema: dict = _SCHEMA, prefix: str = ""):
    for key, check in schema.items():
        dotted = f"{prefix}{key}"
        if isinstance(check, dict):
            _validate(cfg[key], check, dotted + ".")
            continue
        value = cfg[key]
        if not check(value):
            raise ConfigError(dotted, f"invalid value {value!r}")
        choices = _CHOICES.get(dotted)
        if choices is not None and value not in choices:
            raise ConfigError(dotted, f"must be one of {list(choices)}, got {value!r}")


def _check_semantics(cfg: dict):
    if cfg["schema_version"] != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported schema version {cfg['schema_version']}")
    if cfg["threads"] < 1:
        raise ConfigError("threads", "must be at least 1")
    if len(cfg["source"]["g"]) != 3:
        raise ConfigError("source.g", "must have three components")
    if cfg["lattice"]["n"] < 2 or cfg["lattice"]["extent"] <= 0:
        raise ConfigError("lattice", "need n >= 2 and a positive extent")
    for key in ("n_top", "n_bot", "n_pml1", "n_pml2"):
        if cfg["grid"][key] < 1:
            raise ConfigError(f"grid.{key}", "must be positive")
    t = cfg["time"]
    for key in ("T", "S", "t_window"):
        if t[key] <= 0:
            raise ConfigError(f"time.{key}", "must be positive")
    if t["count"] < 8 or t["count"] % 2:
        raise ConfigError("time.count", "must be an even integer >= 8")
    if cfg["laplace"]["s1"] <= 0:
        raise ConfigError("laplace.s1", "must be positive")
    # building the typed objects runs their own checks with named keys
    media_from(cfg)
    geometry_from(cfg)
    pml_from(cfg)


def _env_overrides(environ: Mapping[str, str]) -> dict:
    over: dict = {}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX) or "__" not in name[len(ENV_PREFIX):]:
            continue
        section, key = name[len(ENV_PREFIX):].split("__", 1)
        section = section.lower()
        # keys keep their case in the schema (L1, T, S ...); match case-insensitively
        sect_defaults = DEFAULTS.get(section)
        if not isinstance(sect_defaults, dict):
            raise ConfigError(section, f"unknown section in environment variable {name}")
        match = [k for k in sect_defaults if k.lower() == key.lower()]
        if not match:
            raise ConfigError(f"{section}.{key.lower()}", f"unknown key in environment variable {name}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        over.setdefault(section, {})[match[0]] = value
    return over


def load_config(path: Optional[str]) -> dict:
    """Read a JSON config file (``None`` gives an empty override)."""
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"malformed JSON in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be an object")
    return data


def resolve_config(file_cfg: Optional[Mapping] = None, preset: Optional[str] = None,
                   overrides: Optional[Mapping] = None, environ: Optional[Mapping[str, str]] = None) -> dict:
    """Merge defaults, preset, file, environment and flag overrides, then validate."""
    preset = preset or "default"
    if preset not in PRESETS:
        raise ConfigError("preset", f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    cfg = _merge(DEFAULTS, PRESETS[preset])
    cfg = _merge(cfg, file_cfg or {})
    cfg = _merge(cfg, _env_overrides(os.environ if environ is None else environ))
    cfg = _merge(cfg, overrides or {})
    _validate(cfg)
    _check_semantics(cfg)
    return cfg


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg: Mapping) -> str:
    """SHA-256 of the canonical JSON form."""
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()


def _build(cls, section, values, cfg):
    try:
        return cls(**values)
    except ConfigError as exc:
        key = exc.key if "." in exc.key or exc.key == section else f"{section}.{exc.key}"
        raise ConfigError(key, str(exc).split(": ", 1)[-1]) from None
    except (TypeError, LayerwaveError) as exc:
        raise ConfigError(section, str(exc)) from None


def media_from(cfg: Mapping) -> MediumParams:
    return _build(MediumParams, "media", cfg["media"], cfg)


def geometry_from(cfg: Mapping) -> StripGeometry:
    return _build(StripGeometry, "geometry", cfg["geometry"], cfg)


def pml_from(cfg: Mapping) -> PmlConfig:
    return _build(PmlConfig, "pml", cfg["pml"], cfg)


def laplace_from(cfg: Mapping) -> LaplaceFrequency:
    return _build(LaplaceFrequency, "laplace", cfg["laplace"], cfg)
