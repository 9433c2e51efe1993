"""
RSLab Logging Utility
Provides centralized logging with rich formatting and optional file output
"""

import logging
from datetime import datetime
from pathlib import Path
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler
from rich.theme import Theme

from config.settings import settings

# Custom theme for RSLab
rslab_theme = Theme({
    "info": "cyan",
    "warning": "yellow",
    "error": "bold red",
    "critical": "bold white on red",
    "success": "bold green",
    "debug": "dim blue",
})

console = Console(theme=rslab_theme, stderr=True)

_FILE_FORMAT = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")


def _level() -> int:
    return getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)


class RSLabLogger:
    """Logger for RSLab with rich console and file output"""

    def __init__(self, name: str = "rslab"):
        self.name = name
        self.logger = logging.getLogger(f"rslab.{name}" if name != "rslab" else name)
        self.logger.setLevel(logging.DEBUG)

        # Children propagate to the root "rslab" logger, which owns the handlers
        root = logging.getLogger("rslab")
        if not root.handlers:
            self._setup_handlers(root)

    def _setup_handlers(self, root: logging.Logger):
        """Set up console and file handlers"""

        console_handler = RichHandler(
            console=console,
            show_time=True,
            show_path=False,
            markup=True,
            rich_tracebacks=True
        )
        console_handler.setLevel(_level())
        console_handler.setFormatter(logging.Formatter("%(message)s"))
        root.addHandler(console_handler)

        if settings.LOGS_DIR is not None:
            log_file = settings.LOGS_DIR / f"rslab_{datetime.now().strftime('%Y%m%d')}.log"
            file_handler = logging.FileHandler(log_file)
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(_FILE_FORMAT)
            root.addHandler(file_handler)

        root.setLevel(logging.DEBUG)
        root.propagate = False

    def info(self, message: str, **kwargs):
        """Log info message"""
        self.logger.info(f"[info]{message}[/info]", **kwargs)

    def success(self, message: str, **kwargs):
        """Log success message"""
        self.logger.info(f"[success]{message}[/success]", **kwargs)

    def warning(self, message: str, **kwargs):
        """Log warning message"""
        self.logger.warning(f"[warning]{message}[/warning]", **kwargs)

    def error(self, message: str, **kwargs):
        """Log error message"""
        self.logger.error(f"[error]{message}[/error]", **kwargs)

    def critical(self, message: str, **kwargs):
        """Log critical message"""
        self.logger.critical(f"[critical]{message}[/critical]", **kwargs)

    def debug(self, message: str, **kwargs):
        """Log debug message"""
        self.logger.debug(f"[debug]{message}[/debug]", **kwargs)

    def module_start(self, module_name: str):
        """Log module start"""
        self.info(f"Starting {module_name}")

    def module_complete(self, module_name: str, duration: Optional[float] = None):
        """Log module completion"""
        duration_str = f" ({duration:.2f}s)" if duration else ""
        self.success(f"Completed {module_name}{duration_str}")

    def epoch_done(self, epoch: int, loss: float, train_acc: float, val_acc: float, lr: float):
        """Log the end of a training epoch"""
        self.success(
            f"epoch {epoch}: loss={loss:.4f} train_acc={train_acc:.4f} "
            f"val_acc={val_acc:.4f} lr={lr:.1e}"
        )

    def artifact_written(self, kind: str, path: Path):
        """Log an output file"""
        self.success(f"Wrote {kind}: {path}")


def attach_file(path: Path) -> logging.Handler:
    """Mirror all lab logging into a plain-text file (e.g. <out>/run.log)"""
    handler = logging.FileHandler(path)
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(_FILE_FORMAT)
    logging.getLogger("rslab").addHandler(handler)
    return handler


def detach(handler: logging.Handler):
    """Remove a handler added with attach_file"""
    logging.getLogger("rslab").removeHandler(handler)
    handler.close()


# Global logger instance
logger = RSLabLogger()


def get_logger(name: str) -> RSLabLogger:
    """Get a logger instance for a specific module"""
    return RSLabLogger(name)
