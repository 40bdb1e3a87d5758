"""Process-level configuration management"""

import os
import sys

from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process settings loaded from environment variables (prefix ``REMNET_``)"""

    model_config = SettingsConfigDict(
        env_prefix="REMNET_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # Worker threads for data generation / evaluation; 0 means os.cpu_count()
    num_threads: int = Field(default=0, ge=0)

    # Logging
    log_level: str = "INFO"

    # Output layout
    default_out_dir: str = "runs/default"
    run_config_name: str = "run_config.json"
    checkpoint_name: str = "best.ckpt"
    history_name: str = "history.tsv"

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        value = value.upper()
        if value not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level {value!r}")
        return value

    @property
    def worker_count(self) -> int:
        """Effective number of worker threads"""
        return self.num_threads or (os.cpu_count() or 1)


# Global settings instance; a broken environment falls back to defaults
try:
    settings = Settings()
except ValidationError as e:
    print(f"Invalid REMNET_* environment settings, using defaults: {e}", file=sys.stderr)
    settings = Settings.model_construct()
