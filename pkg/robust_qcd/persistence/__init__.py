import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from robust_qcd.experiments import ResultTable
from robust_qcd.util import write_file_atomic

TABLE_FORMATS = ("csv", "json")
CSV_HEADER = ("row", "column", "value", "stderr", "n_runs", "censored_fraction")


def _number(value: float) -> str:
    return format(float(value), ".17g")


def table_to_csv(table: ResultTable) -> str:
    """
    One line per cell in row-major order. Cells without an estimate carry nan values and zero runs.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for cell in table.ordered_cells():
        estimate = cell.estimate
        writer.writerow((
            cell.row,
            cell.column,
            _number(cell.value),
            _number(cell.stderr),
            estimate.n_runs if estimate is not None else 0,
            _number(estimate.censored_fraction if estimate is not None else math.nan),
        ))
    return buffer.getvalue()


def _to_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def table_to_json(table: ResultTable) -> str:
    return _to_json(table.to_dict())


def curve_to_text(label: str, points: Sequence[Tuple[float, float, float]]) -> str:
    """
    Plot data of a single series: a label comment, a column comment, then "x y stderr" per line.

    :raises ValueError: for an empty series or x values that do not strictly increase
    """
    if len(points) == 0:
        raise ValueError(f"curve '{label}' has no points")
    xs = [x for x, _, _ in points]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ValueError(f"curve '{label}' x values must strictly increase, got {xs}")
    lines = [f"# {label}", "# x y stderr"]
    lines += [" ".join(_number(v) for v in point) for point in points]
    return "\n".join(lines) + "\n"


class ResultWriter:
    """
    Writes experiment artifacts into an output directory:
    <name>.csv / <name>.json tables, <name>.<label>.dat curves, <name>.<report>.json reports
    and a <name>.timing.json sidecar holding the wall time, which is kept out of the
    tables so identical configs produce identical table files.
    """

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)

    def _write(self, file_name: str, content: str) -> Path:
        target = self.out_dir / file_name
        write_file_atomic(target, content)
        return target

    def emit_table(self, table: ResultTable, fmt: str = "csv") -> Path:
        """
        :param table: the (possibly partial) table
        :param fmt: one of "csv", "json"
        :return: path of the written file
        """
        if fmt == "csv":
            return self._write(f"{table.name}.csv", table_to_csv(table))
        if fmt == "json":
            return self._write(f"{table.name}.json", table_to_json(table))
        raise ValueError(f"unknown table format '{fmt}', expected one of {', '.join(TABLE_FORMATS)}")

    def emit_tables(self, table: ResultTable, formats: Sequence[str] = TABLE_FORMATS) -> List[Path]:
        return [self.emit_table(table, fmt) for fmt in formats]

    def emit_curve(self, name: str, label: str, points: Sequence[Tuple[float, float, float]]) -> Path:
        return self._write(f"{name}.{label}.dat", curve_to_text(label, points))

    def emit_report(self, name: str, report_name: str, report: Dict[str, Any]) -> Path:
        return self._write(f"{name}.{report_name}.json", _to_json(report))

    def emit_timing(self, name: str, seconds: float) -> Path:
        return self._write(f"{name}.timing.json", _to_json({"wall_time_seconds": seconds}))


TABLE_KEYS = ("name", "experiment", "rows", "columns", "cells")


def load_table(file_path: Path) -> Optional[ResultTable]:
    """
    Reads a table written in JSON format.

    :return: the table, None if the file holds JSON that is not a table
    """
    data = json.loads(Path(file_path).read_text(encoding="utf-8"))
    if not isinstance(data, dict) or any(key not in data for key in TABLE_KEYS):
        return None
    return ResultTable.from_dict(data)
