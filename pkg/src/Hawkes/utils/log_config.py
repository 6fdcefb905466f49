# src/Hawkes/utils/log_config.py

import os
import sys

from dotenv import load_dotenv
from loguru import logger

load_dotenv()

LOG_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
    "<level>{level}</level> | "
    "<cyan>{message}</cyan>"
)


# ======================================================================
# LOGURU CONFIGURATION
# ======================================================================
def configure_logging(level: str = None) -> None:
    """Route loguru to stderr so stdout stays free for tables."""
    level = (level or os.getenv("STHAWKES_LOG_LEVEL", "INFO")).upper()

    logger.remove()  # remove default
    logger.add(
        sink=lambda msg: print(msg, end="", file=sys.stderr),
        colorize=True,
        level=level,
        format=LOG_FORMAT,
    )
