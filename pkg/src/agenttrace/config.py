"""Engine configuration with flags > env > config file > defaults precedence.

The config file is JSON; environment variables use the AGENTTRACE_ prefix
(AGENTTRACE_STORE, AGENTTRACE_ENDPOINT, ...).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from .export import ExporterConfig

ENV_PREFIX = "AGENTTRACE_"

DEFAULTS = {
    "store_dir": "agenttrace-store",
    "stream_listen": "127.0.0.1:9710",
    "http_listen": "127.0.0.1:9711",
    "endpoint": None,
    "batch_max": 512,
    "flush_interval_ms": 1000,
    "queue_cap": 8192,
    "fallback_path": None,  # defaults to <store_dir>/fallback-spans.jsonl
    "http_body_cap": 16 * 1024 * 1024,
    "verbose": False,
}

_INT_KEYS = {"batch_max", "flush_interval_ms", "queue_cap", "http_body_cap"}
_BOOL_KEYS = {"verbose"}


class ConfigError(Exception):
    pass


@dataclass
class CliConfig:
    store_dir: Path
    stream_listen: tuple[str, int]
    http_listen: tuple[str, int]
    exporter: ExporterConfig
    http_body_cap: int
    verbose: bool


def _parse_listen(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise ConfigError(f"listen address must be host:port, got {value!r}")
    return host, int(port)


def _from_env() -> dict[str, Any]:
    values: dict[str, Any] = {}
    for key in DEFAULTS:
        raw = os.environ.get(ENV_PREFIX + ("STORE" if key == "store_dir" else key.upper()))
        if raw is None:
            continue
        if key in _INT_KEYS:
            values[key] = int(raw)
        elif key in _BOOL_KEYS:
            values[key] = raw.lower() in ("1", "true", "yes")
        else:
            values[key] = raw
    return values


def load_config(
    config_path: Optional[str] = None, overrides: Optional[dict[str, Any]] = None
) -> CliConfig:
    """Resolve the effective configuration.

    ``overrides`` holds flag values (None entries are ignored); the env is
    consulted next, then the JSON config file, then defaults.
    """
    merged = dict(DEFAULTS)

    path = config_path or os.environ.get(ENV_PREFIX + "CONFIG")
    if path:
        try:
            file_values = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        unknown = set(file_values) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_values)

    merged.update(_from_env())
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value

    store_dir = Path(merged["store_dir"])
    fallback = merged["fallback_path"] or str(store_dir / "fallback-spans.jsonl")
    exporter = ExporterConfig(
        endpoint=merged["endpoint"],
        batch_max=int(merged["batch_max"]),
        flush_interval_ms=int(merged["flush_interval_ms"]),
        queue_cap=int(merged["queue_cap"]),
        fallback_path=fallback,
    )
    return CliConfig(
        store_dir=store_dir,
        stream_listen=_parse_listen(str(merged["stream_listen"])),
        http_listen=_parse_listen(str(merged["http_listen"])),
        exporter=exporter,
        http_body_cap=int(merged["http_body_cap"]),
        verbose=bool(merged["verbose"]),
    )
