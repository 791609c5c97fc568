"""Flat ``key = value`` experiment configuration files.

Grammar: one ``key = value`` pair per line; blank lines and lines starting
with ``#`` are ignored; list values are comma separated. Keys not known for
the chosen experiment are rejected, as are duplicates.
"""

from __future__ import annotations

import math
from pathlib import Path


class ConfigError(ValueError):
    pass


def _float(text):
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"not a finite number: {text!r}")
    return value


def _int(text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}") from None


def _floats(text):
    items = [p.strip() for p in text.split(",") if p.strip()]
    if not items:
        raise ConfigError("empty list")
    return [_float(p) for p in items]


def _bool(text):
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ConfigError(f"expected one of {', '.join(options)}; got {text!r}")
        return text
    return parse


def _text(text):
    return text


# key -> (parser, default); a default of REQUIRED means the key must be given
REQUIRED = object()

SCHEMAS = {
    "dephasing": {
        "profile": (_choice("constant", "sin", "table"), REQUIRED),
        "gamma": (_float, 1.0),
        "amplitude": (_float, 1.0),
        "frequency": (_float, 1.0),
        "table": (_text, None),
        "horizon": (_float, 2.0 * math.pi),
        "steps": (_int, 6283),
        "out": (_text, None),
    },
    "gaussian-sweep": {
        "kind": (_choice("ohmic", "super-ohmic"), "ohmic"),
        "exponent": (_float, None),
        "alphas": (_floats, None),
        "alpha_min": (_float, 1e-3),
        "alpha_max": (_float, 0.5),
        "alpha_count": (_int, 10),
        "temperatures": (_floats, [0.0, 2.0, 5.0]),
        "cutoff": (_float, None),
        "modes": (_int, 300),
        "omega_min": (_float, None),
        "omega_max": (_float, None),
        "squeezing": (_float, 1.0),
        "horizon": (_float, None),
        "steps": (_int, 1000),
        "system_frequency": (_float, 1.0),
        "ancilla_frequency": (_float, 1.0),
        "series": (_bool, False),
        "out": (_text, None),
    },
    "divisibility": {
        "file": (_text, REQUIRED),
        "cond_threshold": (_float, 1e8),
        "out": (_text, None),
    },
}

DEFAULT_CUTOFFS = {"ohmic": 10.0, "super-ohmic": 5.0}


def parse_pairs(text):
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = (lineno, value)
    return pairs


def load_config(kind, text):
    """Parse and validate a config for experiment ``kind``; returns a dict with defaults filled in."""
    if kind not in SCHEMAS:
        raise ConfigError(f"unknown experiment {kind!r}")
    schema = SCHEMAS[kind]
    pairs = parse_pairs(text)
    unknown = sorted(set(pairs) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) for {kind}: {', '.join(unknown)}")
    cfg = {}
    for key, (parser, default) in schema.items():
        if key in pairs:
            lineno, value = pairs[key]
            try:
                cfg[key] = parser(value)
            except ConfigError as exc:
                raise ConfigError(f"line {lineno}: {key}: {exc}") from None
        elif default is REQUIRED:
            raise ConfigError(f"missing required key {key!r} for {kind}")
        else:
            cfg[key] = default
    _validate(kind, cfg)
    return cfg


def _validate(kind, cfg):
    if kind == "dephasing":
        if cfg["horizon"] <= 0:
            raise ConfigError("horizon must be positive")
        if cfg["steps"] < 2:
            raise ConfigError("steps must be >= 2")
        if cfg["profile"] == "table" and not cfg["table"]:
            raise ConfigError("profile = table needs a 'table' file")
    elif kind == "gaussian-sweep":
        if cfg["modes"] < 1:
            raise ConfigError("modes must be >= 1")
        if cfg["steps"] < 2:
            raise ConfigError("steps must be >= 2")
        if cfg["horizon"] is not None and cfg["horizon"] <= 0:
            raise ConfigError("horizon must be positive")
        if cfg["squeezing"] < 0:
            raise ConfigError("squeezing must be nonnegative")
        if any(t < 0 for t in cfg["temperatures"]):
            raise ConfigError("temperatures must be nonnegative")
        if cfg["alphas"] is None:
            if not 0 < cfg["alpha_min"] <= cfg["alpha_max"] or cfg["alpha_count"] < 1:
                raise ConfigError("need 0 < alpha_min <= alpha_max and alpha_count >= 1")
        elif any(a < 0 for a in cfg["alphas"]):
            raise ConfigError("alphas must be nonnegative")
        if cfg["cutoff"] is None:
            cfg["cutoff"] = DEFAULT_CUTOFFS[cfg["kind"]]
        if cfg["exponent"] is None:
            cfg["exponent"] = 1.0 if cfg["kind"] == "ohmic" else 3.0
        if cfg["cutoff"] <= 0:
            raise ConfigError("cutoff must be positive")
    elif kind == "divisibility":
        if cfg["cond_threshold"] <= 1:
            raise ConfigError("cond_threshold must exceed 1")


def read_config(kind, path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return load_config(kind, text)


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(format_value(v) for v in value)
    return str(value)


def dump_config(cfg):
    """Serialize a config; keys left unset (None) are omitted so the output reloads."""
    return "".join(f"{key} = {format_value(value)}\n" for key, value in cfg.items() if value is not None)
