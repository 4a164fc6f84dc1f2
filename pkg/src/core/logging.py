"""
Structured logging for the simulator.

All loggers live under the ``src`` namespace, so the CLI can raise or
lower verbosity for the whole package with :func:`set_level`.
"""
from __future__ import annotations

import logging
import sys

from src.core.config import get_settings

_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"
_DATEFMT = "%Y-%m-%d %H:%M:%S"


def _resolve_level(level: str | int | None) -> int:
    if level is None:
        level = get_settings().log_level
    if isinstance(level, int):
        return level
    return getattr(logging, level.upper(), logging.INFO)


def get_logger(name: str, level: str | int | None = None) -> logging.Logger:
    logger = logging.getLogger(name)
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stdout)
        handler.setFormatter(logging.Formatter(_FORMAT, datefmt=_DATEFMT))
        logger.addHandler(handler)
        logger.propagate = False
    logger.setLevel(_resolve_level(level))
    return logger


def set_level(level: str | int) -> None:
    """Apply *level* to every logger already created by :func:`get_logger`."""
    resolved = _resolve_level(level)
    for name, obj in logging.root.manager.loggerDict.items():
        if name.startswith("src") and isinstance(obj, logging.Logger):
            obj.setLevel(resolved)
