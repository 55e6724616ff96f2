import logging
import os

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class Settings:
    def __init__(self):
        # Diagnostics
        self.LOG_LEVEL: str = os.getenv("IPOP_DISPATCH_LOG", "warn").strip().lower()
        self.LOG_FILE: str = os.getenv("IPOP_DISPATCH_LOG_FILE", "")

        # Schedule evaluation
        self.SCHEDULE_WORKERS: int = int(os.getenv("IPOP_DISPATCH_WORKERS", "1"))
        self.SCHEDULE_DEFAULT_STEP_W: float = 5.0
        self.EXHAUSTIVE_SUBSET_LIMIT: int = 12

        # Curve fitting
        self.DEFAULT_FIT_DEGREE: int = 3
        self.MIN_FIT_DEGREE: int = 3

        # Oracle
        self.ORACLE_MAX_MODULES: int = 4
        self.ORACLE_DEFAULT_STEP_W: float = 0.1

        # Output
        self.SIGNIFICANT_DIGITS: int = 9

    @property
    def log_level(self) -> int:
        return LOG_LEVELS.get(self.LOG_LEVEL, logging.WARNING)

    def validate_log_level(self) -> bool:
        """Validate that IPOP_DISPATCH_LOG names a known level"""
        return self.LOG_LEVEL in LOG_LEVELS


settings = Settings()
