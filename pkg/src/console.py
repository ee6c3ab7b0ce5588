import logging
import os

from rich.console import Console
from rich.logging import RichHandler

console = Console(no_color="NO_COLOR" in os.environ, highlight=False)
err_console = Console(stderr=True, no_color="NO_COLOR" in os.environ, highlight=False)


def setup_logging(level: str = "WARNING") -> None:
    """Route every ``logging`` call through rich on stderr."""
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, show_path=False, rich_tracebacks=True)],
        force=True,
    )
