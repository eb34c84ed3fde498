import os
from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class EngineSettings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="LANPOWER_", env_file=".env", extra="ignore")

    threads: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    log_level: str = "INFO"
    burn_in: int = Field(default=500, ge=0)
    bootstrap_replicates: int = Field(default=500, ge=100)
    degeneracy_tol: float = Field(default=1e-8, gt=0)
    failure_fraction: float = Field(default=0.01, ge=0, le=1)


@lru_cache
def get_settings() -> EngineSettings:
    return EngineSettings()
