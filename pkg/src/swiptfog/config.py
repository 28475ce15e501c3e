"""Loading of the flat ``key = value`` parameter file."""
import logging
import typing
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from pydantic import BaseModel, ValidationError

from .exceptions import ConfigError
from .models import RunConfig, SystemParams
from .utils import dbm_to_watts

logger = logging.getLogger(__name__)

NOISE_DBM_KEYS = {
    "noise_dbm": ("noise_n", "noise_s", "noise_f"),
    "noise_n_dbm": ("noise_n",),
    "noise_s_dbm": ("noise_s",),
    "noise_f_dbm": ("noise_f",),
}


def parse_pairs(text: str) -> Dict[str, str]:
    pairs: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _scalar_type(annotation):
    if typing.get_origin(annotation) is typing.Union:
        return next(arg for arg in typing.get_args(annotation) if arg is not type(None))
    return annotation


def _coerce(model: typing.Type[BaseModel], key: str, value: str) -> Any:
    annotation = model.model_fields[key].annotation
    try:
        if typing.get_origin(annotation) in (list, typing.List):
            item = typing.get_args(annotation)[0]
            return [item(v.strip()) for v in value.split(",") if v.strip()]
        if value.lower() == "none":
            return None
        return _scalar_type(annotation)(value)
    except ValueError as e:
        raise ConfigError(f"{key}: cannot read {value!r} ({e})") from e


def _build(params_values: Dict[str, Any], run_values: Dict[str, Any]) -> Tuple[SystemParams, RunConfig]:
    try:
        return SystemParams(**params_values), RunConfig(**run_values)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration:\n{e}") from e


def load_config(path, overrides: Optional[Dict[str, Any]] = None) -> Tuple[SystemParams, RunConfig]:
    """Read physics and run settings from a parameter file; ``overrides`` win over the file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot read parameter file {path}: {e}") from e

    params_values: Dict[str, Any] = {}
    run_values: Dict[str, Any] = {}
    for key, value in parse_pairs(text).items():
        if key in NOISE_DBM_KEYS:
            try:
                watts = dbm_to_watts(float(value))
            except ValueError as e:
                raise ConfigError(f"{key}: cannot read {value!r} ({e})") from e
            for target in NOISE_DBM_KEYS[key]:
                params_values[target] = watts
        elif key in SystemParams.model_fields:
            params_values[key] = _coerce(SystemParams, key, value)
        elif key in RunConfig.model_fields:
            run_values[key] = _coerce(RunConfig, key, value)
        else:
            raise ConfigError(f"unknown key {key!r}")
    run_values.update(overrides or {})
    return _build(params_values, run_values)


def load_run_config(path=None, overrides: Optional[Dict[str, Any]] = None) -> Tuple[SystemParams, RunConfig]:
    """Parameter file when given, SWIPT_FOG_* environment otherwise."""
    if path:
        return load_config(path, overrides)
    try:
        params = SystemParams.from_env()
    except ValidationError as e:
        raise ConfigError(f"invalid configuration:\n{e}") from e
    return _build(params.model_dump(), dict(overrides or {}))
