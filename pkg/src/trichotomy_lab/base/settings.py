"""Runtime configuration for trichotomy-lab."""

from __future__ import annotations

import logging
import os
from functools import lru_cache

from pydantic import BaseModel, Field, ValidationError, field_validator

from trichotomy_lab.base.errors import ConfigurationError

THREADS_ENV = "TRICHOTOMY_LAB_THREADS"
SEED_ENV = "TRICHOTOMY_LAB_SEED"
LOG_LEVEL_ENV = "TRICHOTOMY_LAB_LOG_LEVEL"


class LabSettings(BaseModel):
    """Tolerances, seeds and parallelism shared by all checks."""

    model_config = {"frozen": True}

    threads: int | None = Field(default=None, ge=1)
    divergence_floor: float = Field(default=10.0, gt=0)
    projection_tol: float = Field(default=1e-9, gt=0)
    rank_tol: float = Field(default=1e-10, gt=0)
    verdict_tol: float = Field(default=1e-9, ge=0)
    propagator_tol: float = Field(default=1e-10, gt=0)
    singularity_tol: float = Field(default=1e-12, gt=0)
    seed: int = 0
    pythagoras_samples: int = Field(default=100, ge=1)
    log_level: str = "WARNING"

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        level = value.upper()
        if not isinstance(logging.getLevelName(level), int):
            raise ValueError(f"unknown log level {value!r}")
        return level

    @classmethod
    def from_env(cls) -> LabSettings:
        """Build settings from TRICHOTOMY_LAB_* environment variables."""
        values: dict[str, object] = {}
        if raw := os.environ.get(THREADS_ENV):
            values["threads"] = raw
        if raw := os.environ.get(SEED_ENV):
            values["seed"] = raw
        if raw := os.environ.get(LOG_LEVEL_ENV):
            values["log_level"] = raw.upper()
        try:
            return cls.model_validate(values)
        except ValidationError as e:
            raise ConfigurationError(str(e)) from e

    def scheduler_kwargs(self) -> dict[str, object]:
        """Keyword arguments for `dask.compute` on the threaded scheduler."""
        kwargs: dict[str, object] = {"scheduler": "threads"}
        if self.threads is not None:
            kwargs["num_workers"] = self.threads
        return kwargs


@lru_cache(maxsize=1)
def get_settings() -> LabSettings:
    """Return the process-wide settings, read once from the environment."""
    return LabSettings.from_env()
