"""Tool configuration: a flat ``key = value`` file (comments start with #),
overridable by command-line flags (flags win).

Recognized keys: data_dir, cache_dir, output_dir, backend (mock|http),
base_url, substitution_rate, mock_seed, seed, max_concurrent_requests,
max_requests_per_second, max_retries, initial_backoff_ms, backoff_multiplier,
request_timeout_ms, allow_partial, workers, trainer_timeout_s, and
``adapter.<model> = <command>`` entries mapping model ids to adapter commands.
"""

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ParseError, ValidationError

CONFIG_ENV = "BET_CONFIG"
DEFAULT_CONFIG_PATH = "./betkit.conf"
BACKENDS = ("mock", "http")


@dataclass
class ToolConfig:
    data_dir: str = "."
    cache_dir: str = "./cache"
    output_dir: str = "./out"
    backend: str = "mock"
    base_url: str = ""
    substitution_rate: float = 0.5
    mock_seed: int = 42
    seed: int = 42
    max_concurrent_requests: int = 4
    max_requests_per_second: float = 10.0
    max_retries: int = 3
    initial_backoff_ms: float = 100.0
    backoff_multiplier: float = 2.0
    request_timeout_ms: float = 30000.0
    allow_partial: bool = False
    workers: int = 1
    trainer_timeout_s: float = 86400.0
    adapters: dict[str, str] = field(default_factory=dict)

    def validate(self) -> "ToolConfig":
        if self.backend not in BACKENDS:
            raise ValidationError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")
        if self.backend == "http" and not self.base_url:
            raise ValidationError("backend 'http' requires base_url")
        return self


_BOOL_VALUES = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def parse_config_text(text: str, where: str = "config") -> ToolConfig:
    config = ToolConfig()
    scalar_fields = {f.name: f.type for f in fields(ToolConfig) if f.name != "adapters"}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"{where}: line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key.startswith("adapter."):
            model = key[len("adapter.") :]
            if not model or not value:
                raise ParseError(f"{where}: line {lineno}: bad adapter entry")
            config.adapters[model] = value
            continue
        if key not in scalar_fields:
            raise ParseError(f"{where}: line {lineno}: unknown key {key!r}")
        current = getattr(config, key)
        try:
            if isinstance(current, bool):
                setattr(config, key, _BOOL_VALUES[value.lower()])
            elif isinstance(current, int):
                setattr(config, key, int(value))
            elif isinstance(current, float):
                setattr(config, key, float(value))
            else:
                setattr(config, key, value)
        except (KeyError, ValueError):
            raise ParseError(f"{where}: line {lineno}: bad value {value!r} for {key}") from None
    return config


def load_config(path=None) -> ToolConfig:
    """Load the config file named by `path`, $BET_CONFIG, or ./betkit.conf;
    absent files yield the defaults."""
    candidate = path or os.environ.get(CONFIG_ENV) or DEFAULT_CONFIG_PATH
    candidate = Path(candidate)
    if not candidate.exists():
        if path is not None or os.environ.get(CONFIG_ENV):
            raise ParseError(f"config file not found: {candidate}")
        return ToolConfig()
    return parse_config_text(candidate.read_text(encoding="utf-8"), where=str(candidate))
