import tempfile
from pathlib import Path

from robust_qcd.distributions import Seed
from robust_qcd.experiments import EXPERIMENTS, Budget, ConfigError
from robust_qcd.experiments.config import (
    DEFAULT_SEED,
    default_experiment_config,
    load_experiment_config,
    parse_experiment_config,
)
from tests import TestBase


def _write_config(tmp_path: Path, content: str, name: str = "experiment.yaml") -> Path:
    file_path = tmp_path / name
    file_path.write_text(content, encoding="utf-8")
    return file_path


class ParseExperimentConfigTest(TestBase):

    def test_defaults_are_filled_in(self):
        config = parse_experiment_config({"experiment": "table1"})
        self.assertEqual(config.name, "table1")
        self.assertEqual(config.alpha, 0.001)
        self.assertEqual(config.seed, Seed(DEFAULT_SEED))
        self.assertEqual(config.budget, Budget())
        self.assertEqual(config.params["thetas"], [0.1, 0.2, 0.4, 0.6, 1.0])

    def test_section_overrides_single_keys(self):
        config = parse_experiment_config({"experiment": "table2", "table2": {"eps": [0.05]}})
        self.assertEqual(config.params["eps"], [0.05])
        self.assertEqual(config.params["sigma0"], 1.0)

    def test_every_experiment_has_defaults(self):
        for experiment in EXPERIMENTS:
            with self.subTest(experiment=experiment):
                self.assertEqual(default_experiment_config(experiment).experiment, experiment)

    def test_seed_forms(self):
        self.assertEqual(parse_experiment_config({"experiment": "lfd", "seed": 7}).seed, Seed(7))
        self.assertEqual(parse_experiment_config({"experiment": "lfd", "seed": {"base": 7, "index": 2}}).seed,
                         Seed(7, 2))
        largest = {"experiment": "lfd", "seed": {"base": 7, "index": 2 ** 32 - 1}}
        self.assertEqual(parse_experiment_config(largest).seed, Seed(7, 2 ** 32 - 1))

    def test_invalid_configs(self):
        invalid = [
            [],
            {"experiment": "table9"},
            {"experiment": "table1", "alpah": 0.01},
            {"experiment": "table1", "alpha": 1.0},
            {"experiment": "table1", "alpha": "small"},
            {"experiment": "table1", "seed": -3},
            {"experiment": "table1", "seed": {"base": 1, "index": 2 ** 32}},
            {"experiment": "table1", "budget": {"runs_per_cell": 50}},
            {"experiment": "table1", "budget": {"runs": 1000}},
            {"experiment": "table1", "budget": 1000},
            {"experiment": "table1", "table1": {"theta": [0.1]}},
            {"experiment": "table1", "table1": [0.1]},
        ]
        for data in invalid:
            with self.subTest(data=data):
                with self.assertRaises(ConfigError):
                    parse_experiment_config(data)

    def test_zero_budget_is_a_dry_run(self):
        config = parse_experiment_config({"experiment": "far", "budget": {"runs_per_cell": 0}})
        self.assertTrue(config.budget.is_dry_run)


class ExperimentConfigTest(TestBase):

    def test_md5_ignores_the_output_directory(self):
        config = default_experiment_config("far")
        self.assertEqual(config.md5, config.with_overrides(output=Path("elsewhere")).md5)
        self.assertNotEqual(config.md5, config.with_overrides(seed=1).md5)

    def test_budget_override(self):
        config = default_experiment_config("far").with_overrides(budget=500)
        self.assertEqual(config.budget, Budget(runs_per_cell=500, calibration_cap=5000))
        with self.assertRaises(ConfigError):
            config.with_overrides(budget=-1)

    def test_load_from_yaml(self):
        with tempfile.TemporaryDirectory() as tmp:
            file_path = _write_config(Path(tmp), "\n".join([
                "experiment: far",
                "alpha: 0.01",
                "seed: 5",
                "budget:",
                "  runs_per_cell: 200",
                "  calibration_cap: 4000",
                "far:",
                "  sigma0: [0.1, 10]",
            ]), name="small-far.yaml")
            config = load_experiment_config(file_path)
        self.assertEqual(config.name, "small-far")
        self.assertEqual(config.alpha, 0.01)
        self.assertEqual(config.params["sigma0"], [0.1, 10])
        self.assertEqual(config.budget.calibration_cap, 4000)

    def test_missing_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ConfigError):
                load_experiment_config(Path(tmp) / "missing.yaml")

    def test_malformed_yaml(self):
        with tempfile.TemporaryDirectory() as tmp:
            file_path = _write_config(Path(tmp), "experiment: [far\n")
            with self.assertRaises(ConfigError):
                load_experiment_config(file_path)
