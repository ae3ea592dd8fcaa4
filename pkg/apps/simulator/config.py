"""
Runtime settings for the UAV network simulator CLI.

These are not part of an experiment; they control where results go, how
loud the logs are and how many replicas run in parallel.
"""

from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings with environment variable support."""

    model_config = SettingsConfigDict(
        env_prefix="UAVSIM_", env_file=".env", case_sensitive=False, extra="ignore"
    )

    log_level: str = "INFO"

    # Output Configuration
    output_dir: Path = Path("./results")
    dump_assignments: bool = False

    # Replica fan-out for multi-seed comparisons
    max_workers: int = 1


def get_settings() -> Settings:
    """Read settings from the environment and ``.env``."""
    return Settings()
