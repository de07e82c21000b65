import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, List, Optional

from rich.console import Console
from rich.progress import TaskID

from robust_qcd.config import AppConfig
from robust_qcd.ui.cell_progress import CellProgress

TaskFunc = Callable[[logging.LoggerAdapter], Any]


@dataclass(frozen=True)
class Task:
    name: str
    work: TaskFunc


@dataclass(frozen=True)
class TaskOutcome:
    name: str
    result: Any = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


class ExperimentCoordinator:
    """
    Runs the tasks of one experiment stage (threshold calibrations, table cells) on a thread pool.
    A failing task is logged and recorded in its outcome, the remaining tasks keep running.
    """
    LOGGER = logging.getLogger(__name__)

    def __init__(self, console: Optional[Console] = None, max_workers: Optional[int] = None):
        self._console = console or Console(quiet=True)
        self._max_workers = max_workers

    def run(self, tasks: List[Task], stage: str = "running") -> List[TaskOutcome]:
        """
        :param tasks: the tasks to run
        :param stage: name of the stage, shown for running tasks and in their log lines
        :return: outcomes in task order, independent of completion order
        """
        if len(tasks) == 0:
            self.LOGGER.warning(f"No tasks to run for {stage}.")
            return []
        max_workers = min(self._max_workers or AppConfig.MAX_WORKERS.value, len(tasks))

        with CellProgress(console=self._console, stage=stage) as progress:
            task_ids = [progress.add_cell(task.name) for task in tasks]
            with ThreadPoolExecutor(max_workers=max_workers) as executor:
                futures = [
                    executor.submit(self._wrapped_worker, progress, task_id, task, stage)
                    for task_id, task in zip(task_ids, tasks)
                ]
                outcomes = [future.result() for future in futures]

        if progress.failed > 0:
            self.LOGGER.warning(f"{stage}: {progress.failed} of {len(tasks)} tasks failed")
        return outcomes

    def _wrapped_worker(self, progress: CellProgress, task_id: TaskID, task: Task, stage: str) -> TaskOutcome:
        logger = logging.LoggerAdapter(self.LOGGER, {"cell": task.name, "stage": stage})
        progress.set_running(task_id)
        try:
            result = task.work(logger)
        except Exception as ex:
            error = f"{type(ex).__name__}: {ex}"
            logger.error(f"failed: {ex}")
            progress.mark_done(task_id, error=error)
            return TaskOutcome(name=task.name, error=error)
        progress.mark_done(task_id)
        return TaskOutcome(name=task.name, result=result)
