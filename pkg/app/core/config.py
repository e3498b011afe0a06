import logging
import os
from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field, field_validator, model_validator

class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", extra="ignore")

    env: str = Field(default="local", alias="ENV")

    # ─────────────────────────────────────────────
    # Execution
    # ─────────────────────────────────────────────
    threads: int | None = Field(default=None, alias="MML_THREADS")
    output_dir: Path = Field(default=Path("runs"), alias="MML_OUTPUT_DIR")
    default_trials: int = Field(default=100, alias="MML_DEFAULT_TRIALS")
    default_m_test: int = Field(default=10_000, alias="MML_M_TEST")
    log_level: str = Field(default="INFO", alias="MML_LOG_LEVEL")

    # ─────────────────────────────────────────────
    # HTTP surface
    # ─────────────────────────────────────────────
    max_request_bytes: int = Field(default=256 * 1024, alias="MML_MAX_REQUEST_BYTES")
    max_spec_request_bytes: int = Field(default=64 * 1024, alias="MML_MAX_SPEC_REQUEST_BYTES")
    api_max_tasks: int = Field(default=200, alias="MML_API_MAX_TASKS")

    @field_validator("threads", mode="before")
    @classmethod
    def blank_threads_means_unset(cls, value: object) -> object:
        if isinstance(value, str) and not value.strip():
            return None
        return value

    @field_validator("log_level", mode="before")
    @classmethod
    def normalize_log_level(cls, value: object) -> object:
        if not isinstance(value, str):
            return value
        cleaned = value.strip().upper()
        if not isinstance(logging.getLevelName(cleaned), int):
            raise ValueError("MML_LOG_LEVEL must be a logging level name")
        return cleaned

    @model_validator(mode="after")
    def validate_limits(self) -> "Settings":
        if self.threads is not None and self.threads < 1:
            raise ValueError("MML_THREADS must be at least 1")
        if self.default_trials < 1:
            raise ValueError("MML_DEFAULT_TRIALS must be at least 1")
        if self.default_m_test < 100:
            raise ValueError("MML_M_TEST must be at least 100")
        if self.max_request_bytes < 1024:
            raise ValueError("MML_MAX_REQUEST_BYTES must be at least 1024")
        if self.max_spec_request_bytes < 1024:
            raise ValueError("MML_MAX_SPEC_REQUEST_BYTES must be at least 1024")
        if self.api_max_tasks < 1:
            raise ValueError("MML_API_MAX_TASKS must be at least 1")
        return self

    def spec_request_cap(self) -> int:
        """Body cap for routes that take a spec or config, never above the general cap."""
        return min(self.max_spec_request_bytes, self.max_request_bytes)

    def is_local_env(self) -> bool:
        return self.env in {"local", "test"}

    def thread_cap(self, requested: int | None = None) -> int:
        available = os.cpu_count() or 1
        cap = self.threads if self.threads is not None else available
        if requested is None:
            return cap
        return max(1, min(requested, cap))

settings = Settings()
