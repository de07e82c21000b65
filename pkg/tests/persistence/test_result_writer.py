import json
import math
import tempfile
from pathlib import Path

from robust_qcd.calibration import EstimateWithError
from robust_qcd.distributions import Seed
from robust_qcd.experiments import Budget, Cell, ResultTable
from robust_qcd.persistence import CSV_HEADER, ResultWriter, curve_to_text, load_table, table_to_csv
from tests import TestBase


def _make_estimate(value: float = 10.5, stderr: float = 0.25) -> EstimateWithError:
    return EstimateWithError(value=value, stderr=stderr, n_runs=1000, censored_fraction=0.0, seed=Seed(1, 2))


def _make_table(name: str = "tiny") -> ResultTable:
    return ResultTable(
        name=name,
        experiment="table1",
        rows=["0.1", "1"],
        columns=["optimal-cusum", "glr"],
        cells=[
            Cell("1", "glr", _make_estimate(12.25), seed=Seed(1, 4), budget=Budget(1000, 10_000), eta=3.5),
            Cell("0.1", "glr", _make_estimate(496.0), seed=Seed(1, 2), budget=Budget(1000, 10_000), eta=3.5),
            Cell("0.1", "optimal-cusum", _make_estimate(242.5), seed=Seed(1, 1), budget=Budget(1000, 10_000),
                 eta=2.75),
        ],
        metadata={"alpha": 0.001, "seed": {"base": 1, "index": 0}},
    )


class TableToCsvTest(TestBase):

    def test_single_cell(self):
        table = ResultTable(name="one", experiment="custom", rows=["lfd"], columns=["cusum"],
                            cells=[Cell("lfd", "cusum", _make_estimate())])
        self.assertEqual(table_to_csv(table), "row,column,value,stderr,n_runs,censored_fraction\n"
                                              "lfd,cusum,10.5,0.25,1000,0\n")

    def test_cells_are_row_major(self):
        lines = table_to_csv(_make_table()).splitlines()
        self.assertEqual(lines[0], ",".join(CSV_HEADER))
        self.assertEqual([line.split(",")[:2] for line in lines[1:]],
                         [["0.1", "optimal-cusum"], ["0.1", "glr"], ["1", "glr"]])

    def test_failed_cell_has_no_runs(self):
        table = ResultTable(name="one", experiment="far", rows=["lfd"], columns=["mttfa"],
                            cells=[Cell("lfd", "mttfa", error="calibration failed")])
        self.assertEqual(table_to_csv(table).splitlines()[1], "lfd,mttfa,nan,nan,0,nan")

    def test_full_precision(self):
        table = ResultTable(name="one", experiment="custom", rows=["r"], columns=["c"],
                            cells=[Cell("r", "c", _make_estimate(value=1.0 / 3.0))])
        value = table_to_csv(table).splitlines()[1].split(",")[2]
        self.assertEqual(float(value), 1.0 / 3.0)


class CurveToTextTest(TestBase):

    def test_layout(self):
        text = curve_to_text("robust-shiryaev", [(0.1, 80.5, 0.5), (1.0, 9.25, 0.125)])
        self.assertEqual(text, "# robust-shiryaev\n# x y stderr\n0.10000000000000001 80.5 0.5\n1 9.25 0.125\n")

    def test_empty_curve_is_rejected(self):
        with self.assertRaises(ValueError):
            curve_to_text("empty", [])

    def test_x_must_increase(self):
        with self.assertRaises(ValueError):
            curve_to_text("bad", [(1.0, 2.0, 0.1), (1.0, 3.0, 0.1)])


class ResultWriterTest(TestBase):

    def test_emit_tables(self):
        with tempfile.TemporaryDirectory() as tmp:
            writer = ResultWriter(Path(tmp) / "out")
            paths = writer.emit_tables(_make_table())
            self.assertEqual([p.name for p in paths], ["tiny.csv", "tiny.json"])
            self.assertTrue(all(p.is_file() for p in paths))
            self.assertEqual(list((Path(tmp) / "out").glob("*.tmp")), [])

    def test_json_round_trip(self):
        table = _make_table()
        with tempfile.TemporaryDirectory() as tmp:
            path = ResultWriter(Path(tmp)).emit_table(table, "json")
            loaded = load_table(path)
        self.assertEqual(loaded.to_dict(), table.to_dict())
        self.assertEqual(loaded.get("1", "glr").eta, 3.5)

    def test_identical_tables_give_identical_bytes(self):
        with tempfile.TemporaryDirectory() as tmp:
            writer = ResultWriter(Path(tmp))
            first = {fmt: writer.emit_table(_make_table(), fmt).read_bytes() for fmt in ("csv", "json")}
            second = {fmt: writer.emit_table(_make_table(), fmt).read_bytes() for fmt in ("csv", "json")}
        self.assertEqual(first, second)

    def test_json_keys_are_sorted(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = ResultWriter(Path(tmp)).emit_table(_make_table(), "json")
            text = path.read_text()
        self.assertEqual(text, json.dumps(json.loads(text), sort_keys=True, indent=2) + "\n")

    def test_unknown_format(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ValueError):
                ResultWriter(Path(tmp)).emit_table(_make_table(), "xlsx")

    def test_curve_report_and_timing_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            writer = ResultWriter(Path(tmp))
            curve = writer.emit_curve("bayes", "robust-shiryaev", [(0.1, 80.0, 1.0)])
            report = writer.emit_report("lfd", "lfd", {"a": 0.5, "b": 2.0})
            timing = writer.emit_timing("bayes", 12.5)
            self.assertEqual(curve.name, "bayes.robust-shiryaev.dat")
            self.assertEqual(json.loads(report.read_text()), {"a": 0.5, "b": 2.0})
            self.assertEqual(json.loads(timing.read_text()), {"wall_time_seconds": 12.5})

    def test_load_table_of_a_non_object(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "list.json"
            path.write_text("[1, 2]")
            self.assertIsNone(load_table(path))

    def test_load_table_of_an_object_that_is_not_a_table(self):
        with tempfile.TemporaryDirectory() as tmp:
            writer = ResultWriter(Path(tmp))
            path = writer.emit_report("tiny", "timing", {"wall_time_seconds": 1.5})
            self.assertIsNone(load_table(path))

    def test_nan_estimates_survive_the_json_file(self):
        table = ResultTable(name="nan", experiment="custom", rows=["r"], columns=["c"],
                            cells=[Cell("r", "c", _make_estimate(value=math.nan))])
        with tempfile.TemporaryDirectory() as tmp:
            loaded = load_table(ResultWriter(Path(tmp)).emit_table(table, "json"))
        self.assertTrue(math.isnan(loaded.get("r", "c").value))
