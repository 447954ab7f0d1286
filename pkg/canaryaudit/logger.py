"""
Logging utilities for canaryaudit
"""

import logging
import os
import sys
from typing import Optional


def setup_logger(
    name: str = "canaryaudit",
    level: Optional[str] = None,
) -> logging.Logger:
    """
    Setup logger with appropriate formatting and level.

    Args:
        name: Logger name
        level: Level name, case-insensitive; defaults to LOG_LEVEL, then INFO

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    log_level = (level or os.getenv("LOG_LEVEL", "INFO")).upper()
    numeric_level = logging.getLevelName(log_level)
    if not isinstance(numeric_level, int):
        numeric_level = logging.INFO
    logger.setLevel(numeric_level)

    # Only add a handler once; the level may still change between calls
    if logger.handlers:
        for handler in logger.handlers:
            handler.setLevel(numeric_level)
        return logger

    # Logs always go to stderr, stdout carries command results
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(numeric_level)

    formatter = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    handler.setFormatter(formatter)
    logger.addHandler(handler)

    # Prevent duplicate logs
    logger.propagate = False

    return logger


def get_logger(name: str = "canaryaudit") -> logging.Logger:
    """Logger by name, without touching its configuration."""
    return logging.getLogger(name)
