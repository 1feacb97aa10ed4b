"""
Glassbox Configuration
Central settings loaded from environment variables with sensible defaults.
"""

from pathlib import Path
from pydantic_settings import BaseSettings
from pydantic import Field


# Project root directory
ROOT_DIR = Path(__file__).parent.parent.resolve()


class Settings(BaseSettings):
    """Application settings loaded from .env file and GLASSBOX_* environment variables."""

    # ─── Project ───
    app_name: str = "Glassbox"
    app_version: str = "0.1.0"
    log_level: str = "INFO"

    # ─── Exhaustive Enumeration Limits ───
    partition_limit: int = 12             # max records for set-partition search
    instance_limit: int = 8               # max published rows for possible-instance enumeration
    instance_count_limit: int = 2_000_000  # max candidate instances generated
    assign_support_limit: int = 200_000   # max Assign executions in exact mode
    mask_choice_limit: int = 100_000      # max Mask (partition, G+) combinations

    # ─── Monte Carlo ───
    mc_trials: int = 10_000
    confidence: float = 0.99

    # ─── Experiment Defaults ───
    default_l: int = 8
    default_qd: int = 3
    default_selectivity: float = 0.06
    default_queries: int = 1000
    default_delta_pct: float = 0.5

    # ─── Synthetic Data ───
    synth_sensitive_values: list[str] = Field(default=[f"s{i:02d}" for i in range(50)])
    synth_qi_domains: list[int] = Field(default=[79, 50, 2, 2, 1000])

    class Config:
        env_prefix = "GLASSBOX_"
        env_file = str(ROOT_DIR / ".env")
        env_file_encoding = "utf-8"
        extra = "ignore"


# Global settings instance
settings = Settings()
