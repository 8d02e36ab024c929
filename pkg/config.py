import logging
import sys

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")

    # Reproducibility
    DEFAULT_SEED: int = 20020517

    # Planner Configuration
    ERROR_TARGET: float = 0.05
    KEY_FIDELITY_EPSILON: float = 0.01
    MAX_K: int = 30
    R_MAX: int = 100_000
    STEANE_MARGIN: float = 0.008

    # Simulation Configuration
    TEST_BITS_PER_BASIS: int = 2000
    MAX_WORKERS: int = 4
    SHOW_PROGRESS: bool = True

    # Session Configuration
    TRANSCRIPT_VERSION: int = 1

    # File paths
    OUTPUT_DIR: str = "outputs/runs"

    # Logging Configuration
    LOG_LEVEL: str = "INFO"


settings = Settings()


def configure_logging(level: str = None) -> None:
    """Install a single stderr handler at the configured level.

    Args:
        level: Log level name; defaults to settings.LOG_LEVEL
    """
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel((level or settings.LOG_LEVEL).upper())
