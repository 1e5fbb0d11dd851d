"""YAML scenario files: sectioned key-value documents mapped onto ScenarioConfig."""
from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Any, Dict, Mapping, Union

import yaml

from .core_model import BudgetMode, Strategy
from .simulation import ScenarioConfig


class ConfigError(ValueError):
    pass


# (section, key) -> ScenarioConfig field
LAYOUT: Dict[str, Dict[str, str]] = {
    "scenario": {
        "episode_count": "episode_count",
        "ue_count": "ue_count",
        "subchannel_count": "subchannel_count",
        "rng_seed": "rng_seed",
    },
    "radio": {
        "bandwidth_hz": "bandwidth_hz",
        "transmit_power_w": "transmit_power_w",
        "power_unit_price": "power_unit_price",
    },
    "population": {
        "sinr_db_range": "sinr_db_range",
        "alpha_range": "alpha_range",
        "valuation_range": "valuation_range",
        "rate_scale": "rate_scale",
        "service_classes": "service_classes",
        "redraw_sinr_each_episode": "redraw_sinr_each_episode",
    },
    "budget": {
        "mode": "budget_mode",
        "refill_epsilon": "refill_epsilon",
        "static_budget": "static_budget",
    },
    "strategies": {
        "default": "default_strategy",
        "assignment": "strategy_assignment",
        "f_max": "f_max",
        "block_duration": "block_duration",
        "clearing_rule": "clearing_rule",
    },
    "llm": {
        "policy": "llm_policy",
        "fraction": "llm_fraction",
        "replay": "llm_replay",
        "history_window": "history_window",
        "clamp_bids": "clamp_llm_bids",
        "model": "llm_model",
        "timeout": "llm_timeout",
        "max_retries": "llm_max_retries",
        "temperature": "llm_temperature",
    },
    "sweep": {
        "eta_grid": "eta_grid",
    },
}

_INT = {"episode_count", "ue_count", "subchannel_count", "rng_seed", "f_max", "block_duration",
        "history_window", "llm_max_retries"}
_BOOL = {"redraw_sinr_each_episode", "clamp_llm_bids"}
_STR = {"clearing_rule", "llm_policy", "llm_model"}
_PAIR = {"sinr_db_range", "alpha_range", "valuation_range"}
_FLOAT_TUPLE = {"service_classes", "llm_replay", "eta_grid"}


def _num(field: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{field}: expected a number, got {value!r}")
    return float(value)


def _coerce(field: str, value: Any) -> Any:
    if field in _INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{field}: expected an integer, got {value!r}")
        return value
    if field in _BOOL:
        if not isinstance(value, bool):
            raise ConfigError(f"{field}: expected true/false, got {value!r}")
        return value
    if field in _STR:
        if not isinstance(value, str):
            raise ConfigError(f"{field}: expected text, got {value!r}")
        return value
    if field in _PAIR:
        if value is None and field == "valuation_range":
            return None
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ConfigError(f"{field}: expected [low, high], got {value!r}")
        return (_num(field, value[0]), _num(field, value[1]))
    if field in _FLOAT_TUPLE:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{field}: expected a list of numbers, got {value!r}")
        return tuple(_num(field, v) for v in value)
    if field == "budget_mode":
        try:
            return BudgetMode(value)
        except ValueError:
            raise ConfigError(f"budget.mode: expected 'refill' or 'static', got {value!r}") from None
    if field == "default_strategy":
        try:
            return Strategy(value)
        except ValueError:
            raise ConfigError(f"strategies.default: unknown strategy {value!r}") from None
    if field == "strategy_assignment":
        if not isinstance(value, Mapping):
            raise ConfigError(f"strategies.assignment: expected a mapping of ue id to strategy, got {value!r}")
        out = {}
        for k, v in value.items():
            try:
                out[int(k)] = Strategy(v)
            except (TypeError, ValueError):
                raise ConfigError(f"strategies.assignment: bad entry {k!r}: {v!r}") from None
        return out
    if field == "refill_epsilon" and value is None:
        return None
    return _num(field, value)


def parse_config_mapping(doc: Any) -> Dict[str, Any]:
    """Validate a parsed document and flatten it to ScenarioConfig keyword arguments."""
    if doc is None:
        return {}
    if not isinstance(doc, Mapping):
        raise ConfigError("config must be a mapping of sections")
    out = {}
    for section, body in doc.items():
        if section not in LAYOUT:
            raise ConfigError(f"unknown field {section!r}")
        if body is None:
            continue
        if not isinstance(body, Mapping):
            raise ConfigError(f"section {section!r} must be a mapping")
        for key, value in body.items():
            if key not in LAYOUT[section]:
                raise ConfigError(f"unknown field {key!r} in section {section!r}")
            field = LAYOUT[section][key]
            out[field] = _coerce(field, value)
    return out


def build_config(overrides: Mapping[str, Any], base: ScenarioConfig = ScenarioConfig()) -> ScenarioConfig:
    try:
        return dataclasses.replace(base, **overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}: YAML parse error{where}: {getattr(exc, 'problem', exc)}") from exc
    try:
        return parse_config_mapping(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    """Read a YAML scenario file; missing keys take the default scenario values."""
    return build_config(read_config_file(path))


def config_to_mapping(config: ScenarioConfig) -> Dict[str, Dict[str, Any]]:
    def plain(v):
        if isinstance(v, (BudgetMode, Strategy)):
            return v.value
        if isinstance(v, tuple):
            return [plain(x) for x in v]
        if isinstance(v, Mapping):
            return {int(k): plain(x) for k, x in sorted(v.items())}
        return v

    return {
        section: {key: plain(getattr(config, field)) for key, field in keys.items()}
        for section, keys in LAYOUT.items()
    }


def dump_config(config: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_mapping(config), sort_keys=False, default_flow_style=False)
