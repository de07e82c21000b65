from pathlib import Path

import pytest

from robust_qcd.experiments.config import load_experiment_config
from robust_qcd.experiments.reference import check_table
from robust_qcd.experiments.runner import ExperimentRunner
from tests import TestBase

CONFIG_DIR = Path(__file__).parents[2] / "configs"


def _run_shipped(name: str):
    config = load_experiment_config(CONFIG_DIR / f"{name}.yaml")
    return config, ExperimentRunner(config).run()


@pytest.mark.slow
class ReferenceTablesTest(TestBase):

    def test_table1(self):
        config, outcome = _run_shipped("table1")
        self.assertEqual(check_table(outcome.table, config.alpha), [])
        self.assertEqual([curve.label for curve in outcome.curves], ["optimal-cusum", "robust-cusum", "glr"])

    def test_table2(self):
        config, outcome = _run_shipped("table2")
        self.assertEqual(check_table(outcome.table, config.alpha), [])

    def test_table3(self):
        config, outcome = _run_shipped("table3")
        self.assertEqual(check_table(outcome.table, config.alpha), [])


@pytest.mark.slow
class OrderingPropertiesTest(TestBase):

    def test_bayes_curve(self):
        config, outcome = _run_shipped("bayes-curve")
        self.assertEqual(check_table(outcome.table, config.alpha), [])

    def test_far_ordering(self):
        config, outcome = _run_shipped("far")
        self.assertEqual(check_table(outcome.table, config.alpha), [])

    def test_srp_delay_does_not_grow_with_the_rate(self):
        config, outcome = _run_shipped("srp")
        self.assertEqual(check_table(outcome.table, config.alpha), [])

    def test_jsb(self):
        config, outcome = _run_shipped("jsb")
        self.assertEqual(check_table(outcome.table, config.alpha), [])
        self.assertTrue(outcome.reports["jsb"]["pass"])
