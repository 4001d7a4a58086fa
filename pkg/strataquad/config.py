"""Application configuration using pydantic-settings.

Settings are read from environment variables and an optional .env file. All
variables use the STRATAQUAD_ prefix to avoid clashing with the shell
environment. Experiment parameters (models, designs, schedules) are not
settings; they live in TOML experiment configs, see
strataquad.experiments.config.
"""

import os
from typing import Optional

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide settings loaded from environment variables and .env file.

    Settings are loaded in order of precedence:
    1. Environment variables (highest priority)
    2. .env file in current directory
    3. Default values defined here (lowest priority)

    Attributes:
        STRATAQUAD_BUDGET: Cap on kernel evaluations per exact_mse call.
        STRATAQUAD_THREADS: Default worker count; unset means machine parallelism.
        STRATAQUAD_LOG_LEVEL: Logging level (DEBUG, INFO, WARNING, ERROR).
        STRATAQUAD_LOG_FORMAT: Log output format ('console' or 'json').
    """

    model_config = SettingsConfigDict(
        env_file=".env", env_file_encoding="utf-8", extra="ignore"
    )

    STRATAQUAD_BUDGET: float = 1e9
    STRATAQUAD_THREADS: Optional[int] = None

    STRATAQUAD_LOG_LEVEL: str = "WARNING"
    STRATAQUAD_LOG_FORMAT: str = "console"

    @field_validator("STRATAQUAD_BUDGET")
    @classmethod
    def validate_budget(cls, value: float) -> float:
        """The evaluation cap must be positive."""
        if not value > 0:
            raise ValueError("STRATAQUAD_BUDGET must be positive")
        return value

    @field_validator("STRATAQUAD_THREADS")
    @classmethod
    def validate_threads(cls, value: Optional[int]) -> Optional[int]:
        """A configured worker count must be at least one."""
        if value is not None and value < 1:
            raise ValueError("STRATAQUAD_THREADS must be at least 1")
        return value

    def get_thread_count(self, override: Optional[int] = None) -> int:
        """Resolve the effective worker count.

        Args:
            override: Explicit count (e.g. from --threads); wins when given.

        Returns:
            The override, else STRATAQUAD_THREADS, else os.cpu_count().
        """
        if override is not None:
            if override < 1:
                raise ValueError("thread count must be at least 1")
            return override
        if self.STRATAQUAD_THREADS is not None:
            return self.STRATAQUAD_THREADS
        return os.cpu_count() or 1


settings = Settings()
