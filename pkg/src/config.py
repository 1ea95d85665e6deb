"""
Runtime settings.

Settings come from the process environment (``.env`` is loaded by the
entry point before anything reads it) and are validated into a frozen
model.
"""

import os
from typing import Any, Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .query_model import CQError

ENV_PREFIX = "DYNCQ_"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class ConfigError(CQError):
    """An environment variable holds an invalid value."""


class Settings(BaseModel):
    model_config = ConfigDict(frozen=True)

    log_level: str = "WARNING"
    seed: int = 0
    fuzz_runs: int = Field(default=100, ge=1)
    max_vars: int = Field(default=6, ge=1)
    bench_sizes: Tuple[int, ...] = (100, 1000, 10000)
    warmup_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        value = value.upper()
        if value not in LOG_LEVELS:
            raise ValueError(f"log level must be one of {', '.join(LOG_LEVELS)}")
        return value

    @field_validator("bench_sizes", mode="before")
    @classmethod
    def _split_sizes(cls, value: Any) -> Any:
        if isinstance(value, str):
            return tuple(int(part) for part in value.split(",") if part.strip())
        return value

    @field_validator("bench_sizes")
    @classmethod
    def _positive_sizes(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value or any(size < 1 for size in value):
            raise ValueError("bench sizes must be a non-empty list of positive integers")
        return value


def _read_environment(environ: Dict[str, str]) -> Dict[str, str]:
    values = {}
    for field in Settings.model_fields:
        raw = environ.get(ENV_PREFIX + field.upper())
        if raw is not None and raw.strip():
            values[field] = raw.strip()
    return values


def load_settings(environ: Optional[Dict[str, str]] = None) -> Settings:
    """
    Build settings from ``DYNCQ_*`` variables.

    Raises:
        ConfigError: If a variable cannot be parsed or is out of range.
    """
    environ = dict(os.environ) if environ is None else environ
    try:
        return Settings(**_read_environment(environ))
    except (ValidationError, ValueError) as error:
        if isinstance(error, ValidationError):
            first = error.errors()[0]
            field = str(first["loc"][0]) if first["loc"] else "settings"
            message = f"{ENV_PREFIX}{field.upper()}: {first['msg']}"
        else:
            message = str(error)
        raise ConfigError(message) from error


def validate_settings(environ: Optional[Dict[str, str]] = None) -> Dict[str, Any]:
    """
    Check the configuration without raising.

    Returns:
        Dict containing validation status and details
    """
    environ = dict(os.environ) if environ is None else environ
    provided = sorted(ENV_PREFIX + field.upper() for field in _read_environment(environ))
    try:
        settings = load_settings(environ)
    except ConfigError as error:
        return {
            "valid": False,
            "message": str(error),
            "details": {"provided": provided},
        }
    return {
        "valid": True,
        "message": "Configuration is valid",
        "details": {"provided": provided, "settings": settings.model_dump()},
    }
