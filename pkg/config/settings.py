"""
RSLab Configuration Settings
Process-level settings with environment variable support
"""

import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class Settings:
    """Environment settings for RSLab"""

    # Project paths
    BASE_DIR = Path(__file__).parent.parent

    # Logging
    LOG_LEVEL: str = os.getenv("RSLAB_LOG_LEVEL", "INFO")

    # Numerics
    DEBUG_VALIDATION: bool = os.getenv("RSLAB_DEBUG", "false").lower() == "true"

    def __init__(self):
        log_dir = os.getenv("RSLAB_LOG_DIR", "")
        self.LOGS_DIR: Optional[Path] = Path(log_dir) if log_dir else None
        if self.LOGS_DIR is not None:
            self.LOGS_DIR.mkdir(parents=True, exist_ok=True)

    @property
    def THREADS(self) -> int:
        """Worker cap for evaluation, generation and ablation fan-out"""
        raw = os.getenv("RSLAB_THREADS", "")
        if raw.strip().isdigit() and int(raw) > 0:
            return int(raw)
        return os.cpu_count() or 1

    def validate_config(self) -> list:
        """Return a list of problems with the environment"""
        problems = []
        raw = os.getenv("RSLAB_THREADS", "")
        if raw and not (raw.strip().isdigit() and int(raw) > 0):
            problems.append(f"RSLAB_THREADS must be a positive integer, got {raw!r}")
        if self.LOG_LEVEL.upper() not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            problems.append(f"RSLAB_LOG_LEVEL unknown: {self.LOG_LEVEL}")
        return problems


# Global settings instance
settings = Settings()
