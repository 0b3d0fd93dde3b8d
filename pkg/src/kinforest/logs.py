import logging

from enum import Enum

from rich.console import Console
from rich.logging import RichHandler


class LogLevel(Enum):
    DEBUG    = "DEBUG"
    INFO     = "INFO"
    WARNING  = "WARNING"
    ERROR    = "ERROR"
    CRITICAL = "CRITICAL"

    @property
    def number(self) -> int: return logging.getLevelName(self.value)

    @classmethod
    def choices(cls) -> list[str]: return [level.value for level in cls]


def configure_logging(level: LogLevel | str, console: Console) -> logging.Logger:
    """Route the `kinforest` loggers through a RichHandler on `console`.

    Safe to call more than once; the previous handler is replaced.
    """
    level = LogLevel(level.upper()) if isinstance(level, str) else level
    root = logging.getLogger("kinforest")
    for handler in [h for h in root.handlers if isinstance(h, RichHandler)]:
        root.removeHandler(handler)

    handler = RichHandler(console=console, show_path=False, rich_tracebacks=True, markup=False)
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(level.number)
    return root
