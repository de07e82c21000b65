import json
import tempfile
from pathlib import Path
from unittest.mock import patch

from click.testing import CliRunner

from robust_qcd.cli import cli
from robust_qcd.const import EXIT_ACCEPTANCE_MISS, EXIT_CONFIG_ERROR
from tests import TestBase

CUSTOM_CONFIG = "\n".join([
    "experiment: custom",
    "name: small",
    "alpha: 0.05",
    "seed: 8",
    "budget:",
    "  runs_per_cell: 200",
    "  calibration_cap: 2000",
    "custom:",
    "  p1:",
    "    type: singleton",
    "    distribution: {type: gaussian, mean: 1.0}",
    "  detector: {type: cusum}",
])


def _write_config(tmp_path: Path, content: str = CUSTOM_CONFIG, name: str = "small.yaml") -> str:
    file_path = tmp_path / name
    file_path.write_text(content, encoding="utf-8")
    return str(file_path)


def _invoke(*args: str):
    return CliRunner().invoke(cli, list(args))


class CliTest(TestBase):

    def test_lfd_solve_writes_the_report(self):
        with tempfile.TemporaryDirectory() as tmp:
            result = _invoke("lfd", "solve", "-o", tmp)
            self.assertEqual(result.exit_code, 0, result.output)
            names = sorted(p.name for p in Path(tmp).iterdir())
            self.assertEqual(names, ["lfd.csv", "lfd.json", "lfd.lfd.json", "lfd.timing.json"])
            report = json.loads((Path(tmp) / "lfd.lfd.json").read_text())
            self.assertLess(report["a"], 1.0)

    def test_dry_run_writes_an_empty_table(self):
        with tempfile.TemporaryDirectory() as tmp:
            result = _invoke("table1", "-b", "0", "-o", tmp, "--check")
            self.assertEqual(result.exit_code, 0, result.output)
            self.assertEqual((Path(tmp) / "table1.csv").read_text(),
                             "row,column,value,stderr,n_runs,censored_fraction\n")
            table = json.loads((Path(tmp) / "table1.json").read_text())
            self.assertTrue(table["metadata"]["dry_run"])

    def test_config_for_another_experiment(self):
        with tempfile.TemporaryDirectory() as tmp:
            result = _invoke("table1", "-c", _write_config(Path(tmp)), "-o", tmp)
        self.assertEqual(result.exit_code, EXIT_CONFIG_ERROR)

    def test_run_needs_a_config(self):
        self.assertEqual(_invoke("run").exit_code, EXIT_CONFIG_ERROR)

    def test_invalid_config(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = _write_config(Path(tmp), "experiment: custom\ncustom:\n  detector: {type: page}\n")
            result = _invoke("run", "-c", config, "-o", tmp)
        self.assertEqual(result.exit_code, EXIT_CONFIG_ERROR)

    def test_seed_index_out_of_range(self):
        with tempfile.TemporaryDirectory() as tmp:
            content = CUSTOM_CONFIG.replace("seed: 8", f"seed: {{base: 8, index: {2 ** 32}}}")
            result = _invoke("run", "-c", _write_config(Path(tmp), content), "-o", tmp)
        self.assertEqual(result.exit_code, EXIT_CONFIG_ERROR)

    def test_run_custom_config(self):
        with tempfile.TemporaryDirectory() as tmp:
            result = _invoke("run", "-c", _write_config(Path(tmp)), "-o", tmp, "--check")
            self.assertEqual(result.exit_code, 0, result.output)
            lines = (Path(tmp) / "small.csv").read_text().splitlines()
        self.assertEqual(len(lines), 2)
        self.assertTrue(lines[1].startswith("lfd,cusum,"))

    def test_acceptance_miss(self):
        with tempfile.TemporaryDirectory() as tmp:
            with patch("robust_qcd.cli.check_table", return_value=["forced miss"]):
                result = _invoke("run", "-c", _write_config(Path(tmp)), "-o", tmp, "--check")
            # results are written before the check
            self.assertTrue((Path(tmp) / "small.json").is_file())
        self.assertEqual(result.exit_code, EXIT_ACCEPTANCE_MISS)

    def test_seed_override_changes_the_results(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = _write_config(Path(tmp))
            _invoke("run", "-c", config, "-o", str(Path(tmp) / "a"))
            _invoke("run", "-c", config, "-o", str(Path(tmp) / "b"))
            _invoke("run", "-c", config, "-o", str(Path(tmp) / "c"), "-s", "9")
            a, b, c = ((Path(tmp) / d / "small.csv").read_text() for d in "abc")
        self.assertEqual(a, b)
        self.assertNotEqual(a, c)

    def test_calibrate(self):
        with tempfile.TemporaryDirectory() as tmp:
            result = _invoke("calibrate", "-c", _write_config(Path(tmp)), "-o", tmp)
            self.assertEqual(result.exit_code, 0, result.output)
            report = json.loads((Path(tmp) / "small.calibration.json").read_text())
        self.assertEqual(report["target"], 20.0)
        self.assertEqual(report["mode"], "far")

    def test_evaluate_needs_a_budget(self):
        with tempfile.TemporaryDirectory() as tmp:
            result = _invoke("evaluate", "-c", _write_config(Path(tmp)), "-o", tmp, "-b", "0")
        self.assertEqual(result.exit_code, EXIT_CONFIG_ERROR)

    def test_config_command(self):
        result = _invoke("config")
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn("monte_carlo", result.output)
