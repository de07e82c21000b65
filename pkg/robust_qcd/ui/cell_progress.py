from __future__ import annotations

import threading
from typing import Dict, Optional

from rich.console import Console
from rich.live import Live
from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    ProgressColumn,
    SpinnerColumn,
    TaskID,
    TextColumn,
    TimeElapsedColumn,
)
from rich.markup import escape
from rich.text import Text

from robust_qcd.ui import cell_color

STATUS_STYLES = {
    "queued": "grey50",
    "done": "green",
    "failed": "bold red",
}


class StatusColumn(ProgressColumn):
    """Renders the status field of a row, running stages in cyan."""

    def render(self, task) -> Text:
        status = task.fields.get("status", "")
        return Text(status, style=STATUS_STYLES.get(status, "cyan"), justify="right")


class CellProgress:
    """
    Live display of one experiment stage: a summary bar counting finished cells,
    and one row per cell showing whether it is queued, running, done or failed.
    Safe to update from worker threads.
    """

    def __init__(self, console: Console, stage: str):
        self.console = console
        self.stage = stage
        self._progress = Progress(
            SpinnerColumn(finished_text="·"),
            TextColumn("{task.description}", justify="left"),
            StatusColumn(),
            BarColumn(bar_width=None),
            MofNCompleteColumn(),
            TimeElapsedColumn(),
            console=self.console,
            transient=False,
        )
        self._lock = threading.Lock()
        self._live: Optional[Live] = None
        self._summary: Optional[TaskID] = None
        self._cells = 0
        self._failed: Dict[TaskID, str] = {}

    def __enter__(self) -> CellProgress:
        self._summary = self._progress.add_task(f"[bold]{self.stage}[/]", status="", total=0)
        self._live = Live(self._progress, console=self.console, refresh_per_second=8)
        self._live.__enter__()
        return self

    def __exit__(self, exc_type, exc, tb):
        if self._live:
            self._live.__exit__(exc_type, exc, tb)
            self._live = None

    def add_cell(self, name: str) -> TaskID:
        with self._lock:
            self._cells += 1
            if self._summary is not None:
                self._progress.update(self._summary, total=self._cells)
            return self._progress.add_task(
                f"  [{cell_color(name)}]{escape(name)}[/]",
                status="queued",
                total=1,
                start=False,
            )

    def set_running(self, task_id: TaskID):
        with self._lock:
            self._progress.start_task(task_id)
            self._progress.update(task_id, status=self.stage)

    def mark_done(self, task_id: TaskID, error: Optional[str] = None):
        with self._lock:
            if error is not None:
                self._failed[task_id] = error
            self._progress.update(task_id, status="failed" if error else "done", completed=1)
            self._progress.stop_task(task_id)
            if self._summary is not None:
                self._progress.advance(self._summary)

    @property
    def failed(self) -> int:
        return len(self._failed)
