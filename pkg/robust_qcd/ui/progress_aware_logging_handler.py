import logging
from datetime import datetime

from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.text import Text

from robust_qcd.ui import cell_color

CELL_NAME_WIDTH = 28


def _timestamp(dt: datetime) -> Text:
    return Text(dt.strftime("[%H:%M:%S.%f")[:-3] + "]")


class ProgressAwareLoggingHandler(RichHandler):
    """
    Writes log records through the console that also renders the live cell progress,
    so log lines are printed above it instead of tearing it apart.

    Records logged through a cell adapter (extra ``cell``, optionally ``stage``) are prefixed
    with the colored cell name, all others with ``main``.
    """

    def __init__(self, console: Console, **kwargs):
        super().__init__(
            console=console,
            markup=True,
            rich_tracebacks=True,
            show_time=True,
            show_path=False,
            log_time_format=_timestamp,
            omit_repeated_times=False,
            **kwargs
        )
        self.setFormatter(logging.Formatter(fmt="%(cell_prefix)s %(message)s"))

    @staticmethod
    def cell_prefix(record: logging.LogRecord) -> str:
        cell = getattr(record, "cell", None)
        if cell is None:
            return f"[bold white]{'main':<{CELL_NAME_WIDTH}}[/]"
        label = cell if len(cell) <= CELL_NAME_WIDTH else cell[:CELL_NAME_WIDTH - 1] + "…"
        label = escape(label.ljust(CELL_NAME_WIDTH))
        stage = getattr(record, "stage", None)
        suffix = f" [dim]{stage}[/]" if stage else ""
        return f"[bold {cell_color(cell)}]{label}[/]{suffix}"

    def emit(self, record: logging.LogRecord):
        record.cell_prefix = self.cell_prefix(record)
        super().emit(record)
