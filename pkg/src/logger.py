"""Logging setup for the interpolation pipeline.

Console output plus an optional rotating run log in the output
directory. The root logger carries the handlers so that module loggers
(src.gapfill.impute, src.pipeline, ...) emit from worker threads too.
"""

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional


LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
BANNER_WIDTH = 70


def setup_logger(
    name: str = "src",
    level: str = "INFO",
    log_file: Optional[str] = None,
    max_bytes: int = 10 * 1024 * 1024,
    backup_count: int = 3,
) -> logging.Logger:
    """Set up and configure the application logger.

    Args:
        name: Logger name (default: "src" so module loggers inherit)
        level: Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Path to the run log. If None, only console logging.
        max_bytes: Maximum size of log file before rotation
        backup_count: Number of rotated files to keep

    Returns:
        Configured logger instance

    Examples:
        >>> logger = setup_logger(level="INFO", log_file="output/run.log")
        >>> logger.info("Stage gapfill started")
    """
    log_level = _parse_log_level(level)
    formatter = _create_formatter()

    console_handler = _create_console_handler(formatter)
    console_handler.setLevel(log_level)

    file_handler = None
    if log_file:
        file_handler = _create_file_handler(log_file, formatter, max_bytes, backup_count)
        file_handler.setLevel(log_level)

    root_logger = logging.getLogger()
    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)
        handler.close()
    root_logger.setLevel(log_level)
    root_logger.addHandler(console_handler)
    if file_handler:
        root_logger.addHandler(file_handler)

    logger = logging.getLogger(name)
    logger.handlers.clear()
    logger.setLevel(log_level)
    logger.propagate = True

    return logger


def log_banner(logger: logging.Logger, title: str) -> None:
    """Log a title framed by separator lines."""
    logger.info("=" * BANNER_WIDTH)
    logger.info(title)
    logger.info("=" * BANNER_WIDTH)


def _parse_log_level(level: str) -> int:
    """Parse log level string to logging constant.

    Raises:
        ValueError: If level is invalid
    """
    level_map = {
        "DEBUG": logging.DEBUG,
        "INFO": logging.INFO,
        "WARNING": logging.WARNING,
        "ERROR": logging.ERROR,
        "CRITICAL": logging.CRITICAL,
    }

    level_upper = level.upper()
    if level_upper not in level_map:
        raise ValueError(
            f"Invalid log level: {level}. Valid levels: {list(level_map.keys())}"
        )

    return level_map[level_upper]


def _create_formatter() -> logging.Formatter:
    """Create log formatter with consistent format."""
    return logging.Formatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT)


def _create_console_handler(formatter: logging.Formatter) -> logging.StreamHandler:
    """Create console handler for stdout."""
    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(formatter)
    return handler


def _create_file_handler(
    log_file: str,
    formatter: logging.Formatter,
    max_bytes: int,
    backup_count: int,
) -> RotatingFileHandler:
    """Create rotating file handler, creating parent directories."""
    log_path = Path(log_file)
    log_path.parent.mkdir(parents=True, exist_ok=True)

    handler = RotatingFileHandler(
        log_file,
        maxBytes=max_bytes,
        backupCount=backup_count,
        encoding="utf-8",
    )
    handler.setFormatter(formatter)

    return handler
