"""Runtime settings for the benchmark CLI."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _project_root() -> Path | None:
    module_root = Path(__file__).resolve().parents[2]
    if (module_root / "pyproject.toml").exists():
        return module_root
    return None


def _default_output_root() -> Path:
    root = _project_root()
    if root is not None:
        return root / "runs"
    return Path.cwd() / "runs"


def _default_cache_dir() -> Path:
    root = _project_root()
    if root is not None:
        return root / "data" / "oracle"
    return Path.home() / ".cache" / "qiga-bench"


class Settings(BaseSettings):
    """Runtime configuration loaded from environment variables."""

    output_root: Path = Field(
        default_factory=_default_output_root,
        description="Default directory receiving run, replay and report output.",
    )
    cache_dir: Path = Field(
        default_factory=_default_cache_dir,
        description="Directory holding cached knapsack optima and centroid baselines.",
    )
    workers: int = Field(
        default=1,
        ge=1,
        description="Maximum number of runs executed concurrently.",
    )
    log_level: str = Field(
        default="INFO",
        description="Log level used when the CLI does not receive --log-level.",
    )

    model_config = SettingsConfigDict(
        env_prefix="QIGA_",
        env_file=".env",
        extra="ignore",
        case_sensitive=False,
    )

    @field_validator("log_level", mode="before")
    @classmethod
    def _normalise_level(cls, value: str | None) -> str:
        if value is None or not str(value).strip():
            return "INFO"
        level = str(value).strip().upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"log level must be one of {', '.join(LOG_LEVELS)}")
        return level


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Return a cached instance of application settings."""

    settings = Settings()
    settings.cache_dir.mkdir(parents=True, exist_ok=True)
    return settings
