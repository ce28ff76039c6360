import os
import sys
from pathlib import Path
from typing import Literal, Optional

from loguru import logger
from dotenv import load_dotenv
load_dotenv()

LOG_LEVELS = ('TRACE', 'DEBUG', 'INFO', 'SUCCESS', 'WARNING', 'ERROR')

DEFAULTS = {
    'log_level': "INFO",
    'output_dir': "runs",
    'cache_dir': "runs/cache",
}

ENV_KEYS = {
    'log_level': "RFSHAKE_LOG_LEVEL",
    'output_dir': "RFSHAKE_OUTPUT_DIR",
    'cache_dir': "RFSHAKE_CACHE_DIR",
}


def get_setting(name: Literal['log_level', 'output_dir', 'cache_dir']) -> str:
    """Environment value for `name`, falling back to `DEFAULTS`."""
    return os.environ.get(ENV_KEYS[name]) or DEFAULTS[name]


def default_output_dir() -> Path:
    return Path(get_setting('output_dir'))


def default_cache_dir() -> Path:
    return Path(get_setting('cache_dir'))


def configure_logging(level: Optional[str] = None) -> None:
    """Replace loguru's default sink with a stderr sink at `level`."""
    level = (level or get_setting('log_level')).upper()
    if level not in LOG_LEVELS:
        level = DEFAULTS['log_level']

    logger.remove()
    logger.add(
        sys.stderr, level=level,
        format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {name}:{line} - {message}",
    )
