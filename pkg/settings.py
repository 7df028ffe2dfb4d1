import os
import logging
from typing import Optional

from dotenv import load_dotenv

from errors import ConfigError

load_dotenv()

APP_VERSION = "0.3.1"

DEFAULT_OUT_DIR = "results"
DEFAULT_MAX_DIM = 4096
DEFAULT_WORKERS = 4


def _get_setting(name: str, explicit: Optional[str] = None, default: Optional[str] = None) -> Optional[str]:
    """
    Explicit argument first, then environment (.env is loaded at import),
    then the built-in default.
    """
    if explicit is not None and str(explicit).strip():
        return str(explicit)

    value = os.getenv(name)
    if value is not None and value.strip():
        return value.strip()

    return default


def out_dir(explicit: Optional[str] = None) -> str:
    return _get_setting("URP_OUT_DIR", explicit, DEFAULT_OUT_DIR)


def max_dim() -> int:
    raw = _get_setting("URP_MAX_DIM", default=str(DEFAULT_MAX_DIM))
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"URP_MAX_DIM must be an integer, got {raw!r}.")
    if value <= 0:
        raise ConfigError(f"URP_MAX_DIM must be positive, got {value}.")
    return value


def worker_count() -> int:
    raw = _get_setting("URP_WORKERS", default=str(DEFAULT_WORKERS))
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"URP_WORKERS must be an integer, got {raw!r}.")


def configure_logging(level: Optional[str] = None) -> None:
    name = _get_setting("URP_LOG_LEVEL", level, "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
