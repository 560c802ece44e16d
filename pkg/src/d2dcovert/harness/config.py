"""Run configuration: INI files with [model] [mc] [sca] [sweep] sections.

Keys may also be written flat as ``section.key = value``. Model keys are
``SystemParams`` field names in linear units; a ``_dbm`` suffix (powers,
noise) or ``_db`` suffix (thresholds, ratios) converts from log units.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

from ..game import ScaConfig
from ..model import SystemParams, db_to_linear, dbm_to_watt, validate
from ..simulator import McConfig

SECTIONS = ("model", "mc", "sca", "sweep")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    params: SystemParams = field(default_factory=SystemParams)
    mc: McConfig = field(default_factory=McConfig)
    sca: ScaConfig = field(default_factory=ScaConfig)
    sweep: dict = field(default_factory=dict)


def parse_flat(text: str) -> dict:
    """Flatten an INI text (sections optional) into ``{"section.key": "value"}``."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string("[__flat__]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    out = {}
    for sec in cp.sections():
        for key, value in cp.items(sec):
            name = key if sec == "__flat__" else f"{sec}.{key}"
            if name.split(".", 1)[0] not in SECTIONS or "." not in name:
                raise ConfigError(f"unknown config key {name!r}; expected one of {SECTIONS} sections")
            out[name] = value.strip()
    return out


def parse_override(text: str) -> tuple:
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like section.key=value")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def _number(key, value):
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def _model_value(key, value):
    names = set(SystemParams.field_names())
    if key in names:
        return key, _number(key, value)
    if key.endswith("_dbm") and key[:-4] in names:
        return key[:-4], float(dbm_to_watt(_number(key, value)))
    if key.endswith("_db") and key[:-3] in names:
        return key[:-3], float(db_to_linear(_number(key, value)))
    raise ConfigError(f"unknown model parameter {key!r}")


def _dataclass_update(obj, section, items):
    kinds = {f.name: f.type for f in fields(obj)}
    changes = {}
    for key, value in items.items():
        if key not in kinds:
            raise ConfigError(f"unknown {section} key {key!r}; known: {sorted(kinds)}")
        if "str" in str(kinds[key]):
            changes[key] = value
            continue
        num = _number(f"{section}.{key}", value)
        is_int = "int" in str(kinds[key])
        if is_int and num != int(num):
            raise ConfigError(f"{section}.{key} must be an integer")
        changes[key] = int(num) if is_int else num
    try:
        return replace(obj, **changes)
    except ValueError as exc:
        raise ConfigError(f"{section}: {exc}") from exc


def build_config(flat: dict) -> RunConfig:
    groups = {s: {} for s in SECTIONS}
    for name, value in flat.items():
        sec, key = name.split(".", 1)
        if sec not in groups:
            raise ConfigError(f"unknown section {sec!r}")
        groups[sec][key] = value
    model = dict(_model_value(k, v) for k, v in groups["model"].items())
    try:
        params = validate(SystemParams(**model))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    mc = _dataclass_update(McConfig(), "mc", groups["mc"])
    sca = _dataclass_update(ScaConfig(), "sca", groups["sca"])
    return RunConfig(params, mc, sca, groups["sweep"])


def load_config(path=None, overrides=()) -> RunConfig:
    flat = {}
    if path is not None:
        try:
            with open(path) as fh:
                flat.update(parse_flat(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for text in overrides:
        key, value = parse_override(text)
        if key.split(".", 1)[0] not in SECTIONS or "." not in key:
            raise ConfigError(f"override key {key!r} must start with one of {SECTIONS}")
        flat[key] = value
    return build_config(flat)


def parse_grid(text: str) -> list:
    """``"a:b:step"`` (inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ConfigError(f"range {text!r} must be lo:hi:step with step > 0")
        lo, hi, step = parts
        n = int(round((hi - lo) / step)) + 1
        return [lo + k * step for k in range(n)]
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}") from None
    if not values:
        raise ConfigError("empty grid")
    return values
