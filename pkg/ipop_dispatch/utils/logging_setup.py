import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

from ipop_dispatch.config import LOG_LEVELS, settings


def setup_logging(level_name: Optional[str] = None, quiet: bool = False):
    """Set up logging with a stderr console handler and an optional rotating file"""
    detailed_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s'
    )
    simple_formatter = logging.Formatter(
        '%(asctime)s - %(levelname)s - %(message)s'
    )

    root_logger = logging.getLogger()

    if quiet:
        log_level = logging.ERROR
    elif level_name:
        log_level = LOG_LEVELS.get(level_name.lower(), settings.log_level)
    else:
        log_level = settings.log_level

    root_logger.setLevel(log_level)
    root_logger.handlers.clear()

    if settings.LOG_FILE:
        log_path = Path(settings.LOG_FILE)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_path,
            maxBytes=10*1024*1024,
            backupCount=5,
            encoding='utf-8'
        )
        file_handler.setLevel(log_level)
        file_handler.setFormatter(detailed_formatter)
        root_logger.addHandler(file_handler)

    # stdout carries command output, so diagnostics go to stderr
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(simple_formatter)
    root_logger.addHandler(console_handler)

    app_logger = logging.getLogger("ipop_dispatch")
    app_logger.setLevel(log_level)

    if not settings.validate_log_level():
        app_logger.warning(f"Unknown IPOP_DISPATCH_LOG value '{settings.LOG_LEVEL}', using 'warn'")

    return app_logger
