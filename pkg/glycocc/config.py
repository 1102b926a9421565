"""
Application configuration and settings.
"""
import logging
import sys
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables
load_dotenv()

# Base directory
BASE_DIR = Path(__file__).resolve().parent
DATA_DIR = BASE_DIR / "data"

APP_NAME = "glycocc"


class Settings(BaseSettings):
    """Process-wide settings, overridable through GLYCOCC_* variables."""

    model_config = SettingsConfigDict(env_prefix="GLYCOCC_", extra="ignore")

    workdir: Path = Path(".")
    log_level: str = "INFO"
    log_file: str = "glycocc.log"
    template_path: Path = DATA_DIR / "templates.json"
    seed: int = 0
    workers: int = 1


settings = Settings()

# Model defaults
DEFAULT_INPUT_DIM = 128
DEFAULT_HIDDEN_DIM = 1024
DEFAULT_LAYERS = 8
DROPOUT_P = 0.2
BATCHNORM_EPS = 1e-5
BATCHNORM_MOMENTUM = 0.1
PRELU_INIT = 0.25
MIN_TWO_CELL_SIZE = 3
EXHAUSTIVE_CHECK_LIMIT = 600

# Training defaults
DEFAULT_LR = 1e-3
DEFAULT_BATCH_SIZE = 128
DEFAULT_EPOCHS = 100
DEFAULT_SPLIT = (0.7, 0.2, 0.1)

# Benchmark defaults
OOD_THRESHOLD = 0.75
MORGAN_RADIUS = 2
MORGAN_BITS = 1024


def configure_logging(level: Optional[str] = None, workdir: Optional[Path] = None) -> None:
    """Console handler without timestamps, file handler with them."""
    root = logging.getLogger("glycocc")
    root.setLevel((level or settings.log_level).upper())
    for handler in list(root.handlers):
        root.removeHandler(handler)

    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(console)

    log_dir = Path(workdir) if workdir is not None else settings.workdir
    try:
        log_dir.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_dir / settings.log_file, encoding="utf-8")
        file_handler.setFormatter(
            logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
        )
        root.addHandler(file_handler)
    except OSError as e:
        root.warning("File logging disabled: %s", e)
