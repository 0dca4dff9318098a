"""Log setup. Everything human-readable goes through loguru to stderr."""

import sys
from typing import Optional, TextIO

from loguru import logger

LOG_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {name}:{function} - {message}"


def setup_logging(level: str = "INFO", sink: Optional[TextIO] = None) -> None:
    """Replace loguru's default handler with a single sink at the given level."""
    logger.remove()
    logger.add(sink or sys.stderr, level=level.upper(), format=LOG_FORMAT, colorize=False)
