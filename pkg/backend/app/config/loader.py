"""
Config Loader

Builds a validated ``SimConfig`` from a preset, a JSON config file and
explicit overrides, applied in that order (later wins).

A config file may name its base with ``"preset": "<name>"``.  Overrides
use dotted keys, e.g. ``{"rl.epsilon": 0.2, "seed": 7}``.
"""

from __future__ import annotations

import copy
import json
import logging
import os
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from pydantic import ValidationError

from backend.app.engine.errors import ConfigurationError
from backend.app.schema.config_schema import SimConfig

logger = logging.getLogger(__name__)

# Paths
_PROJECT_ROOT = Path(__file__).resolve().parent.parent.parent.parent
PRESET_DIR = _PROJECT_ROOT / "data" / "presets"
PRESET_NAMES: tuple[str, ...] = ("table1", "table2", "delay_study")

OUTPUT_DIR_ENV = "WSN_SIM_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "results"


def output_dir() -> Path:
    """Default directory for CLI output."""
    return Path(os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR))


def load_preset(name: str) -> dict[str, Any]:
    if name not in PRESET_NAMES:
        raise ConfigurationError(f"unknown preset '{name}'; choose one of {list(PRESET_NAMES)}")
    with open(PRESET_DIR / f"{name}.json", encoding="utf-8") as fh:
        return json.load(fh)


def _read_file(path: Union[str, Path]) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8").strip()
    if not text:
        return {}
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be a JSON object")
    return data


def _merge(base: dict[str, Any], extra: Mapping[str, Any]) -> dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _expand_dotted(overrides: Mapping[str, Any]) -> dict[str, Any]:
    nested: dict[str, Any] = {}
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        cursor = nested
        for part in parts[:-1]:
            cursor = cursor.setdefault(part, {})
        cursor[parts[-1]] = value
    return nested


def _describe(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def build_config(data: Mapping[str, Any]) -> SimConfig:
    try:
        return SimConfig.model_validate(dict(data))
    except ValidationError as exc:
        raise ConfigurationError(f"invalid config: {_describe(exc)}") from exc


def load_config(
    path: Optional[Union[str, Path]] = None,
    preset: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> SimConfig:
    """Resolve preset, file and overrides into a validated config."""
    file_data = _read_file(path) if path is not None else {}
    base_name = preset or file_data.pop("preset", None)
    file_data.pop("preset", None)

    data = load_preset(base_name) if base_name else {}
    data = _merge(data, file_data)
    data = _merge(data, _expand_dotted(overrides or {}))

    config = build_config(data)
    logger.info(
        "Loaded config '%s' (preset=%s, file=%s, %d overrides).",
        config.name, base_name, path, len(overrides or {}),
    )
    return config
