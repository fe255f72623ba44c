"""
Application settings read from the environment (and an optional .env file)
"""
import logging
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables
load_dotenv()

# Prefix for every environment variable the forecaster reads
ENV_PREFIX = "SPECTRAL_MOE_"


class Settings(BaseSettings):
    """
    Process-wide defaults

    The following environment variables are read:
    - SPECTRAL_MOE_DATA_DIR: directory relative dataset paths resolve against
    - SPECTRAL_MOE_OUTPUT_DIR: default output directory
    - SPECTRAL_MOE_SEED: default seed for every random sub-stream
    - SPECTRAL_MOE_THREADS: default worker cap
    - SPECTRAL_MOE_LOG_LEVEL: logging level name
    """
    model_config = SettingsConfigDict(env_prefix=ENV_PREFIX, extra="ignore")

    data_dir: Path = Path(".")
    output_dir: Path = Path("runs")
    seed: int = 2025
    threads: int = Field(default=1, ge=1)
    log_level: str = "INFO"

    def resolve_data_path(self, path: Optional[Path]) -> Optional[Path]:
        """
        Resolve a dataset path against the data directory when it is relative
        """
        if path is None:
            return None
        path = Path(path)
        if path.is_absolute() or path.exists():
            return path
        return self.data_dir / path


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """
    Get the settings instance
    """
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def configure_logging(level: Optional[str] = None) -> None:
    """
    Configure root logging once for the process
    """
    level_name = (level or get_settings().log_level).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
