"""
Centralised simulator settings loaded from environment / .env file.

Experiment parameters live in the per-experiment YAML files under
``experiments/``; this module only holds process-level knobs (output
location, worker count, integrator defaults, log level).
"""
from __future__ import annotations

from pathlib import Path
from functools import lru_cache

from pydantic_settings import BaseSettings
from dotenv import load_dotenv

# Load .env from project root (two levels up from this file)
_ENV_PATH = Path(__file__).resolve().parents[2] / ".env"
load_dotenv(_ENV_PATH)


class Settings(BaseSettings):
    sim_output_dir: str = "results"
    sim_workers: int = 0  # 0 = all available cores
    sim_integrator_tol: float = 1e-7
    sim_psf_nodes: int = 24

    log_level: str = "INFO"

    @property
    def output_path(self) -> Path:
        return Path(self.sim_output_dir)

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"


@lru_cache
def get_settings() -> Settings:
    return Settings()
