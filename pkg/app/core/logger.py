import logging
import os
import sys
from datetime import datetime
from pathlib import Path

# Log directory is overridable so tests and CLI runs can redirect it
log_dir = Path(os.getenv("LPR_LOG_DIR", "logs"))

# One file per day
log_file = log_dir / f"lpr_{datetime.now().strftime('%Y%m%d')}.log"

# Log format
log_format = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
log_date_format = "%Y-%m-%d %H:%M:%S"


def _console_level() -> int:
    level_name = os.getenv("LOG_LEVEL", "INFO").upper()
    return getattr(logging, level_name, logging.INFO)


def get_logger(name: str) -> logging.Logger:
    """
    Get a configured logger instance.

    Args:
        name (str): Name of the logger (usually __name__)

    Returns:
        logging.Logger: Configured logger instance
    """
    logger = logging.getLogger(name)

    # Don't add handlers to a logger that already has handlers
    if logger.handlers:
        return logger

    logger.setLevel(logging.DEBUG)
    logger.propagate = False

    formatter = logging.Formatter(fmt=log_format, datefmt=log_date_format)

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(_console_level())
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    # File logging is best effort: read-only working directories still run
    try:
        log_dir.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file)
    except OSError:
        logger.warning("File logging disabled, cannot write to %s", log_dir)
    else:
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger
