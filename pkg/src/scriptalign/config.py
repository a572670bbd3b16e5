"""Pipeline configuration: loading (TOML or JSON), validation, echo."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .align import AlignConfig
from .errors import ConfigError

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


@dataclass(frozen=True)
class PipelineConfig:
    align: AlignConfig = field(default_factory=AlignConfig)
    pad_ms: int = 0
    input_dir: str = "."
    output_dir: str = "."
    log_level: str = "INFO"


DEFAULT_PIPELINE_CONFIG = PipelineConfig()


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    """Read a pipeline config file; format chosen by suffix (.json or TOML)."""
    p = Path(path)
    raw = p.read_bytes()
    try:
        if p.suffix.lower() == ".json":
            data = json.loads(raw.decode("utf-8"))
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: cannot parse config ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config root must be a table/object")
    return pipeline_config_from_dict(data)


def pipeline_config_from_dict(data: dict) -> PipelineConfig:
    _reject_unknown(data, ("align", "segment", "paths", "log_level"), "")

    align_data = dict(data.get("align", {}))
    _reject_unknown(
        align_data,
        ("min_anchor_len", "min_score", "script_window", "subtitle_window", "strip_chars"),
        "align.",
    )
    align_cfg = AlignConfig(
        min_anchor_len=_int_in_range(align_data, "min_anchor_len", 1, 10**6, 4, "align."),
        min_score=_number_in_range(align_data, "min_score", 0.0, 1.0, 0.3, "align."),
        script_window=_int_in_range(align_data, "script_window", 1, 10**7, 2000, "align."),
        subtitle_window=_int_in_range(align_data, "subtitle_window", 1, 10**7, 4000, "align."),
        strip_chars=_string(align_data, "strip_chars", AlignConfig().strip_chars, "align."),
    )

    segment_data = dict(data.get("segment", {}))
    _reject_unknown(segment_data, ("pad_ms",), "segment.")
    pad_ms = _int_in_range(segment_data, "pad_ms", 0, 10**10, 0, "segment.")

    paths_data = dict(data.get("paths", {}))
    _reject_unknown(paths_data, ("input_dir", "output_dir"), "paths.")
    input_dir = _string(paths_data, "input_dir", ".", "paths.")
    output_dir = _string(paths_data, "output_dir", ".", "paths.")

    log_level = data.get("log_level", "INFO")
    if log_level not in LOG_LEVELS:
        raise ConfigError(f"log_level: must be one of {LOG_LEVELS}, got {log_level!r}")

    return PipelineConfig(align_cfg, pad_ms, input_dir, output_dir, log_level)


def _reject_unknown(data: dict, allowed: tuple[str, ...], prefix: str) -> None:
    for key in data:
        if key not in allowed:
            raise ConfigError(f"{prefix}{key}: unknown configuration key")


def _int_in_range(data: dict, key: str, lo: int, hi: int, default: int, prefix: str) -> int:
    value = data.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool) or not lo <= value <= hi:
        raise ConfigError(f"{prefix}{key}: must be an integer in [{lo}, {hi}], got {value!r}")
    return value


def _number_in_range(
    data: dict, key: str, lo: float, hi: float, default: float, prefix: str
) -> float:
    value = data.get(key, default)
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not lo <= value <= hi:
        raise ConfigError(f"{prefix}{key}: must be within [{lo}, {hi}], got {value!r}")
    return float(value)


def _string(data: dict, key: str, default: str, prefix: str) -> str:
    value = data.get(key, default)
    if not isinstance(value, str):
        raise ConfigError(f"{prefix}{key}: must be a string, got {value!r}")
    return value


def config_echo(cfg: PipelineConfig) -> dict:
    """JSON-ready copy of the effective config, embedded in every output."""
    return {
        "align": {
            "min_anchor_len": cfg.align.min_anchor_len,
            "min_score": cfg.align.min_score,
            "script_window": cfg.align.script_window,
            "subtitle_window": cfg.align.subtitle_window,
            "strip_chars": cfg.align.strip_chars,
        },
        "segment": {"pad_ms": cfg.pad_ms},
        "paths": {"input_dir": cfg.input_dir, "output_dir": cfg.output_dir},
        "log_level": cfg.log_level,
    }
