"""
Process-level settings for the MASSIVE toolkit.

Values come from environment variables prefixed ``MASSIVE_`` or from a
``.env`` file. Per-run physics parameters live in scenario files, not here.
"""
from functools import lru_cache
from typing import Optional

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Toolkit settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="MASSIVE_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # --- Logging ---
    log_level: str = "INFO"

    # --- Runs ---
    default_seed: int = 20180801
    sweep_workers: int = 1
    monte_carlo_workers: int = 1

    # --- Output ---
    csv_precision: int = 16
    audit_log_dir: Optional[str] = None

    # --- Environment ---
    environment: str = "development"  # label stored in audit records

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate the level name is one logging knows."""
        level = v.upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"Unknown log level {v!r}")
        return level

    @field_validator("sweep_workers", "monte_carlo_workers")
    @classmethod
    def validate_workers(cls, v: int) -> int:
        """Validate worker counts are positive."""
        if v <= 0:
            raise ValueError("worker counts must be positive")
        return v

    @field_validator("csv_precision")
    @classmethod
    def validate_precision(cls, v: int) -> int:
        """Validate CSV precision is between 6 and 17 digits."""
        if not 6 <= v <= 17:
            raise ValueError("csv_precision must be between 6 and 17")
        return v


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
