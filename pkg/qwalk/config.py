"""
Runtime settings for the quantum-walk toolkit.

Values come from QWALK_* environment variables or a local .env file.
"""
import os
from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic import Field, validator
from pydantic_settings import BaseSettings, SettingsConfigDict

PROJECT_ROOT = Path(__file__).resolve().parent.parent


class Settings(BaseSettings):
    """Process-wide settings."""
    model_config = SettingsConfigDict(env_prefix="QWALK_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    log_file: Optional[str] = None
    output_dir: Path = Path("results")
    workers: int = Field(0, ge=0)
    timezone: str = "UTC"
    scenario_dir: Path = PROJECT_ROOT / "data" / "scenarios"

    @validator("log_level")
    def validate_log_level(cls, v):
        """Accept any case, store upper case."""
        level = v.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Unknown log level {v}")
        return level

    def resolved_workers(self) -> int:
        """Worker count with 0 meaning all available CPUs."""
        return self.workers or (os.cpu_count() or 1)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Get the settings instance."""
    return Settings()
