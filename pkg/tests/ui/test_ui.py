import logging

from rich.console import Console

from robust_qcd.ui import CELL_PALETTE, cell_color
from robust_qcd.ui.cell_progress import CellProgress
from robust_qcd.ui.progress_aware_logging_handler import CELL_NAME_WIDTH, ProgressAwareLoggingHandler
from tests import TestBase


def _make_record(**extra) -> logging.LogRecord:
    record = logging.LogRecord("robust_qcd", logging.INFO, __file__, 1, "hello", None, None)
    for key, value in extra.items():
        setattr(record, key, value)
    return record


class CellColorTest(TestBase):

    def test_same_name_same_color(self):
        self.assertEqual(cell_color("theta=0.4/robust"), cell_color("theta=0.4/robust"))

    def test_color_is_from_the_palette(self):
        for name in ("a", "b", "theta=1/glr", "eps=0.05"):
            with self.subTest(name=name):
                self.assertIn(cell_color(name), CELL_PALETTE)


class ProgressAwareLoggingHandlerTest(TestBase):

    def test_plain_records_are_prefixed_with_main(self):
        prefix = ProgressAwareLoggingHandler.cell_prefix(_make_record())
        self.assertIn("main".ljust(CELL_NAME_WIDTH), prefix)

    def test_cell_records_carry_name_and_stage(self):
        prefix = ProgressAwareLoggingHandler.cell_prefix(_make_record(cell="theta=1", stage="evaluating"))
        self.assertIn("theta=1".ljust(CELL_NAME_WIDTH), prefix)
        self.assertIn(cell_color("theta=1"), prefix)
        self.assertTrue(prefix.endswith("[dim]evaluating[/]"))

    def test_long_cell_names_are_shortened(self):
        prefix = ProgressAwareLoggingHandler.cell_prefix(_make_record(cell="x" * 100))
        self.assertIn("x" * (CELL_NAME_WIDTH - 1) + "…", prefix)
        self.assertNotIn("x" * CELL_NAME_WIDTH, prefix)

    def test_emit_writes_to_the_console(self):
        console = Console(record=True, width=200)
        handler = ProgressAwareLoggingHandler(console=console)
        handler.emit(_make_record(cell="cell-a"))
        text = console.export_text()
        self.assertIn("cell-a", text)
        self.assertIn("hello", text)


class CellProgressTest(TestBase):

    def test_counts_failed_cells(self):
        with CellProgress(console=Console(quiet=True), stage="evaluating") as progress:
            ok = progress.add_cell("ok")
            bad = progress.add_cell("bad")
            progress.set_running(ok)
            progress.set_running(bad)
            progress.mark_done(ok)
            progress.mark_done(bad, error="ValueError: boom")
        self.assertEqual(progress.failed, 1)
