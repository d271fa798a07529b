"""
Runtime configuration for the reconstruction toolkit.

Values come from the environment (optionally a local .env file) and can be
overridden by CLI flags.
"""

import logging
import os
from dataclasses import dataclass

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def get_env_variable(key, default=None):
    """Get environment variable with fallback"""
    return os.getenv(key, default)


@dataclass(frozen=True)
class Settings:
    log_level: str = "INFO"
    oracle_max_columns: int = 4096
    workers: int = 1
    default_seed: int = 0


def load_settings() -> Settings:
    """
    Build settings from CSI_* environment variables

    Returns:
        Settings: frozen settings snapshot
    """
    return Settings(
        log_level=get_env_variable("CSI_LOG_LEVEL", "INFO").upper(),
        oracle_max_columns=int(get_env_variable("CSI_ORACLE_MAX_COLUMNS", "4096")),
        workers=max(1, int(get_env_variable("CSI_WORKERS", "1"))),
        default_seed=int(get_env_variable("CSI_DEFAULT_SEED", "0")),
    )


def configure_logging(level: str = None) -> None:
    """Configure root logging once for command-line use"""
    if level is None:
        level = load_settings().log_level
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format=LOG_FORMAT)
