"""Run configuration: documented TOML schema, fail-closed validation, defaults.

Unknown sections or keys are rejected rather than ignored, so a misspelled
key can never silently fall back to a default. ``load_config`` materializes
every default; ``dumps_config`` re-serializes the materialized config so a
round trip is the identity.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .langevin import FloquetParams
from .pca import FIXED, PERIODIC, RULES, NoiseModel

__all__ = ["ConfigError", "RunConfig", "load_config", "loads_config", "dumps_config"]


class ConfigError(ValueError):
    pass


_ENGINES = ("pca", "langevin")
_TIERS = ("full", "quick")
_KINDS = ("uniform", "island", "stripes", "file")

# section -> key -> (type tag, default, allowed values or None)
SCHEMA = {
    "run": {
        "engine": ("str", "langevin", _ENGINES),
        "width": ("int", 32, None),
        "height": ("int", 32, None),
        "seed": ("int", 0, None),
        "tier": ("str", "full", _TIERS),
        "out": ("str", "runs/out", None),
    },
    "initial": {
        "kind": ("str", "uniform", _KINDS),
        "value": ("int", 1, (-1, 1)),
        "island_width": ("int", 8, None),
        "island_height": ("int", 8, None),
        "period": ("int", 4, None),
        "stripe_width": ("int", 1, None),
        "path": ("str", "", None),
    },
    "langevin": {
        "v": ("float", 50.0, None),
        "F": ("float", 1e-4, None),
        "temperature": ("float", 0.0, None),
        "kappa_f": ("float", 1.0, None),
        "dt": ("float", 1e-3, None),
        "mass": ("float", 1.0, None),
        "pin_ramp": ("float", 1.0, None),
        "cycles": ("int", 100, None),
        "step2_rule": ("str", "toom", tuple(RULES)),
        "step4_rule": ("str", "pi_toom", tuple(RULES)),
        "guard": ("float", 1e6, None),
        "snapshot_every": ("int", 0, None),
    },
    "pca": {
        "rule": ("str", "pi_toom", tuple(RULES)),
        "eps_plus": ("float", 0.0, None),
        "eps_minus": ("float", 0.0, None),
        "steps": ("int", 200, None),
        "boundary": ("str", PERIODIC, (PERIODIC, FIXED)),
        "fixed_value": ("int", 1, (-1, 1)),
    },
    "scan": {
        "temperatures": ("float_list", [5.17, 11.94], None),
        "error_rates": ("float_list", [0.005, 0.02, 0.05, 0.1, 0.15, 0.2], None),
        "v_values": ("float_list", [], None),
        "v_over_t": ("float_list", [5.0, 10.0, 15.0, 20.0, 25.0], None),
        "rules": ("str_list", ["do_nothing", "toom", "pi_toom"], None),
        "realizations": ("int", 50, None),
        "window_start": ("int", 750, None),
        "window_cycles": ("int", 500, None),
        "warmup_cycles": ("int", 200, None),
        "measure_cycles": ("int", 25, None),
        "trajectories": ("int", 300, None),
        "traj_warmup": ("int", 8, None),
        "traj_cycles": ("int", 16, None),
        "blocks": ("int", 1000, None),
        "box_sizes": ("int_list", [2, 4, 8, 16], None),
        "k_max": ("float", 3.0, None),
        "dts": ("int_list", [1, 2, 3], None),
        "radius": ("int", 3, None),
        "kappas": ("float_list", [0.5, 1.0, 1.5], None),
        "trace_temperatures": ("float_list", [0.5, 2.0, 10.0], None),
        "trace_site": ("int_list", [1, 1], None),
        "trace_cycles": ("int", 3, None),
    },
}

_POSITIVE = {
    ("run", "width"), ("run", "height"),
    ("initial", "island_width"), ("initial", "island_height"),
    ("initial", "period"), ("initial", "stripe_width"),
    ("langevin", "v"), ("langevin", "kappa_f"), ("langevin", "dt"),
    ("langevin", "mass"), ("langevin", "guard"),
    ("scan", "realizations"), ("scan", "trajectories"), ("scan", "blocks"),
    ("scan", "window_cycles"), ("scan", "traj_cycles"), ("scan", "measure_cycles"),
}
_NON_NEGATIVE = {
    ("run", "seed"), ("langevin", "temperature"), ("langevin", "cycles"),
    ("langevin", "snapshot_every"), ("pca", "eps_plus"), ("pca", "eps_minus"),
    ("pca", "steps"), ("scan", "warmup_cycles"), ("scan", "traj_warmup"),
    ("scan", "window_start"), ("scan", "k_max"), ("scan", "trace_cycles"),
}


@dataclass
class RunConfig:
    """Materialized configuration; sections mirror the TOML schema."""

    run: dict
    initial: dict
    langevin: dict
    pca: dict
    scan: dict

    def section(self, name: str) -> dict:
        return getattr(self, name)

    def floquet_params(self, temperature=None, v=None, step2=None, step4=None):
        lg = self.langevin
        return FloquetParams(
            v=lg["v"] if v is None else float(v),
            F=lg["F"],
            temperature=lg["temperature"] if temperature is None else float(temperature),
            kappa_f=lg["kappa_f"],
            dt=lg["dt"],
            step2_rule=RULES[lg["step2_rule"] if step2 is None else step2],
            step4_rule=RULES[lg["step4_rule"] if step4 is None else step4],
            pin_ramp=lg["pin_ramp"],
            guard=lg["guard"],
        )

    def noise_model(self, rate=None) -> NoiseModel:
        if rate is not None:
            return NoiseModel.symmetric(float(rate))
        return NoiseModel(self.pca["eps_plus"], self.pca["eps_minus"])


def _check_value(section, key, tag, value, allowed):
    where = f"[{section}] {key}"
    if tag == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        out = int(value)
    elif tag == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        out = float(value)
    elif tag == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        out = value
    elif tag in ("float_list", "int_list", "str_list"):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        kind = tag.split("_")[0]
        out = []
        for item in value:
            if kind == "float" and isinstance(value, list) and isinstance(item, (int, float)) and not isinstance(item, bool):
                out.append(float(item))
            elif kind == "int" and isinstance(item, int) and not isinstance(item, bool):
                out.append(int(item))
            elif kind == "str" and isinstance(item, str):
                out.append(item)
            else:
                raise ConfigError(f"{where}: bad list entry {item!r}")
    else:  # pragma: no cover - schema typo guard
        raise ConfigError(f"{where}: unknown schema tag {tag}")
    if allowed is not None and out not in allowed:
        raise ConfigError(f"{where}: {out!r} not one of {allowed}")
    if (section, key) in _POSITIVE and isinstance(out, (int, float)) and out <= 0:
        raise ConfigError(f"{where}: must be positive, got {out!r}")
    if (section, key) in _NON_NEGATIVE and isinstance(out, (int, float)) and out < 0:
        raise ConfigError(f"{where}: must be non-negative, got {out!r}")
    return out


def _validate(raw: dict) -> RunConfig:
    sections = {}
    for name in raw:
        if name not in SCHEMA:
            raise ConfigError(f"unknown section [{name}]")
        if not isinstance(raw[name], dict):
            raise ConfigError(f"[{name}] must be a table")
    for name, keys in SCHEMA.items():
        given = raw.get(name, {})
        for key in given:
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in section [{name}]")
        out = {}
        for key, (tag, default, allowed) in keys.items():
            if key in given:
                out[key] = _check_value(name, key, tag, given[key], allowed)
            else:
                out[key] = default.copy() if isinstance(default, list) else default
        sections[name] = out
    cfg = RunConfig(**sections)
    if cfg.pca["eps_plus"] + cfg.pca["eps_minus"] > 1.0:
        raise ConfigError("[pca] eps_plus + eps_minus must not exceed 1")
    for k in ("eps_plus", "eps_minus"):
        if cfg.pca[k] > 1.0:
            raise ConfigError(f"[pca] {k} must lie in [0, 1]")
    if not 0.0 <= cfg.langevin["pin_ramp"] <= 1.0:
        raise ConfigError("[langevin] pin_ramp must lie in [0, 1]")
    n = round(1.0 / cfg.langevin["dt"])
    if n < 1 or abs(n * cfg.langevin["dt"] - 1.0) > 1e-9:
        raise ConfigError("[langevin] dt must divide the unit sub-step exactly")
    if len(cfg.scan["trace_site"]) != 2:
        raise ConfigError("[scan] trace_site must be [x, y]")
    for r in cfg.scan["rules"]:
        if r not in RULES:
            raise ConfigError(f"[scan] rules: unknown rule {r!r}")
    return cfg


def loads_config(text: str) -> RunConfig:
    try:
        raw = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from None
    return _validate(raw)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        return loads_config(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, list):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {value!r}")


def dumps_config(cfg: RunConfig) -> str:
    """Serialize a materialized config; loads_config(dumps_config(c)) == c."""
    lines = []
    for name in SCHEMA:
        lines.append(f"[{name}]")
        for key in SCHEMA[name]:
            lines.append(f"{key} = {_toml_value(cfg.section(name)[key])}")
        lines.append("")
    return "\n".join(lines)


def default_config() -> RunConfig:
    return _validate({})
