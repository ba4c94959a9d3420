import logging

from rich.console import Console
from rich.logging import RichHandler

from config.settings import settings

# Diagnostics go to stderr; stdout is reserved for JSON reports.
stderr_console = Console(stderr=True)


def configure_logging(level: str | None = None) -> None:
    """Route all package loggers through a single rich handler on stderr."""
    logging.basicConfig(
        level=(level or settings.LOG_LEVEL).upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=stderr_console, show_path=False, rich_tracebacks=True)],
        force=True,
    )
