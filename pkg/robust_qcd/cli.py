import functools
import json
import logging
import os
import signal
import sys
from pathlib import Path
from typing import Any, Callable, Optional

import click
from container_app_conf.formatter.toml import TomlFormatter
from rich.console import Console
from rich.theme import Theme

from robust_qcd.config import AppConfig
from robust_qcd.const import EXIT_ACCEPTANCE_MISS, EXIT_CONFIG_ERROR
from robust_qcd.experiments import AcceptanceMiss, ConfigError
from robust_qcd.experiments.config import ExperimentConfig, default_experiment_config, load_experiment_config
from robust_qcd.experiments.coordinator import ExperimentCoordinator
from robust_qcd.experiments.reference import check_table
from robust_qcd.experiments.runner import ExperimentOutcome, ExperimentRunner, calibrate_custom, evaluate_custom
from robust_qcd.persistence import ResultWriter
from robust_qcd.ui.progress_aware_logging_handler import ProgressAwareLoggingHandler

parent_dir = os.path.abspath(os.path.join(os.path.abspath(__file__), "..", ".."))
sys.path.append(parent_dir)

LOGGER = logging.getLogger(__name__)


def signal_handler(signal=None, frame=None):
    LOGGER.info("Exiting...")
    os._exit(0)


PARAM_CONFIG = "config_path"
PARAM_SEED = "seed"
PARAM_BUDGET = "budget"
PARAM_OUT = "out"
PARAM_CHECK = "check"

CMD_OPTION_NAMES = {
    PARAM_CONFIG: ["-c", "--config", PARAM_CONFIG],
    PARAM_SEED: ["-s", "--seed"],
    PARAM_BUDGET: ["-b", "--budget"],
    PARAM_OUT: ["-o", "--out"],
    PARAM_CHECK: ["--check"],
}

CONTEXT_SETTINGS = dict(help_option_names=['-h', '--help'])


@click.group(context_settings=CONTEXT_SETTINGS)
@click.version_option()
def cli():
    pass


def get_option_names(parameter: str) -> list:
    """
    Returns a list of all valid console parameter names for a given parameter
    :param parameter: the parameter to check
    :return: a list of all valid names to use this parameter
    """
    return CMD_OPTION_NAMES[parameter]


def _base_setup() -> Console:
    signal.signal(signal.SIGINT, signal_handler)

    config = AppConfig()

    log_level_str = str(config.LOG_LEVEL.value).strip().upper()
    log_level = getattr(logging, log_level_str, config.LOG_LEVEL.default)

    custom_theme = Theme({
        "logging.level.debug": "dim",
        "logging.level.info": "white",
    })
    console = Console(theme=custom_theme, stderr=True)
    rich_handler = ProgressAwareLoggingHandler(console=console)

    root_logger = logging.getLogger()
    root_logger.handlers = []  # remove all handlers from root logger
    root_logger.addHandler(rich_handler)
    root_logger.setLevel(log_level)

    LOGGER.info("=== robust-qcd ===")
    return console


def _exit_codes(func: Callable) -> Callable:
    """
    Maps config errors and acceptance misses to the process exit code.
    """

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ConfigError as ex:
            LOGGER.error(f"Invalid configuration: {ex}")
            sys.exit(EXIT_CONFIG_ERROR)
        except AcceptanceMiss as ex:
            LOGGER.error(f"Acceptance check failed: {ex}")
            sys.exit(EXIT_ACCEPTANCE_MISS)

    return wrapper


def _experiment_options(func: Callable) -> Callable:
    options = [
        click.option(*get_option_names(PARAM_CONFIG), required=False, default=None,
                     type=click.Path(dir_okay=False, path_type=Path),
                     help='Experiment config file (YAML)'),
        click.option(*get_option_names(PARAM_SEED), required=False, default=None, type=click.IntRange(min=0),
                     help='Overrides the base seed of the config'),
        click.option(*get_option_names(PARAM_BUDGET), required=False, default=None, type=click.IntRange(min=0),
                     help='Overrides the replications per cell (calibrations get ten times that), 0 validates only'),
        click.option(*get_option_names(PARAM_OUT), required=False, default=None,
                     type=click.Path(file_okay=False, path_type=Path),
                     help='Output directory'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _load_config(config_path: Optional[Path], experiment: Optional[str], seed: Optional[int],
                 budget: Optional[int], out: Optional[Path]) -> ExperimentConfig:
    """
    :param config_path: config file, the built-in defaults of the experiment are used if None
    :param experiment: the experiment the command expects, None accepts any
    """
    if config_path is None:
        if experiment is None:
            raise ConfigError("a config file is required (--config)")
        config = default_experiment_config(experiment)
    else:
        config = load_experiment_config(config_path)
    if experiment is not None and config.experiment != experiment:
        raise ConfigError(f"'{config_path}' configures '{config.experiment}', expected '{experiment}'")
    return config.with_overrides(seed=seed, budget=budget, output=out)


def _write_outcome(config: ExperimentConfig, outcome: ExperimentOutcome):
    writer = ResultWriter(config.output)
    paths = writer.emit_tables(outcome.table)
    for curve in outcome.curves:
        paths.append(writer.emit_curve(config.name, curve.label, curve.points))
    for report_name, report in outcome.reports.items():
        paths.append(writer.emit_report(config.name, report_name, report))
    paths.append(writer.emit_timing(config.name, outcome.wall_time))
    for path in paths:
        LOGGER.info(f"Wrote {path}")


def _run(experiment: Optional[str], config_path: Optional[Path], seed: Optional[int], budget: Optional[int],
         out: Optional[Path], check: bool) -> ExperimentOutcome:
    config = _load_config(config_path, experiment, seed, budget, out)
    console = _base_setup()
    LOGGER.info(f"Running '{config.name}' ({config.experiment}), config md5 {config.md5}")

    outcome = ExperimentRunner(config, ExperimentCoordinator(console=console)).run()
    _write_outcome(config, outcome)

    if check:
        misses = check_table(outcome.table, config.alpha)
        if misses:
            raise AcceptanceMiss(f"{len(misses)} miss(es): " + "; ".join(misses))
        LOGGER.info("All acceptance checks passed")
    return outcome


def _echo_json(data: Any):
    click.echo(json.dumps(data, sort_keys=True, indent=2))


def _experiment_command(name: str, experiment: Optional[str], help_text: str):
    @cli.command(name=name, help=help_text)
    @_experiment_options
    @click.option(*get_option_names(PARAM_CHECK), is_flag=True, default=False,
                  help='Compare the results with the reference values, exit with 3 on a miss')
    @_exit_codes
    def command(config_path: Optional[Path], seed: Optional[int], budget: Optional[int], out: Optional[Path],
                check: bool):
        _run(experiment, config_path, seed, budget, out, check)

    return command


c_table1 = _experiment_command("table1", "table1", "Reproduce the Gaussian mean shift delay table")
c_table2 = _experiment_command("table2", "table2", "Reproduce the eps-contamination table over sigma1")
c_table3 = _experiment_command("table3", "table3", "Reproduce the eps-contamination table over sigma0")
c_bayes_curve = _experiment_command("bayes-curve", "bayes-curve",
                                    "Robust vs optimal Shiryaev average delay over theta")
c_run = _experiment_command("run", None, "Run the experiment of any config file")


@cli.command(name="calibrate")
@_experiment_options
@_exit_codes
def c_calibrate(config_path: Optional[Path], seed: Optional[int], budget: Optional[int], out: Optional[Path]):
    """
    Calibrate the threshold of the detector of a custom config
    """
    config = _load_config(config_path, "custom", seed, budget, out)
    _base_setup()
    result = calibrate_custom(config)
    path = ResultWriter(config.output).emit_report(config.name, "calibration", result.to_dict())
    LOGGER.info(f"Wrote {path}")
    _echo_json(result.to_dict())


@cli.command(name="evaluate")
@_experiment_options
@_exit_codes
def c_evaluate(config_path: Optional[Path], seed: Optional[int], budget: Optional[int], out: Optional[Path]):
    """
    Estimate the detection delay of the detector of a custom config
    """
    config = _load_config(config_path, "custom", seed, budget, out)
    _base_setup()
    if config.budget.is_dry_run:
        raise ConfigError("evaluate needs a positive budget")
    report = evaluate_custom(config)
    path = ResultWriter(config.output).emit_report(config.name, "evaluation", report)
    LOGGER.info(f"Wrote {path}")
    _echo_json(report)


@cli.group(name="lfd")
def c_lfd():
    """
    Least favorable distributions
    """


@c_lfd.command(name="solve")
@_experiment_options
@_exit_codes
def c_lfd_solve(config_path: Optional[Path], seed: Optional[int], budget: Optional[int], out: Optional[Path]):
    """
    Solve the least favorable pair of an lfd config
    """
    outcome = _run("lfd", config_path, seed, budget, out, check=False)
    _echo_json(outcome.reports["lfd"])


@cli.group(name="jsb")
def c_jsb():
    """
    Joint stochastic boundedness
    """


@c_jsb.command(name="check")
@_experiment_options
@click.option(*get_option_names(PARAM_CHECK), is_flag=True, default=False,
              help='Exit with 3 if a probe violates the dominance')
@_exit_codes
def c_jsb_check(config_path: Optional[Path], seed: Optional[int], budget: Optional[int], out: Optional[Path],
                check: bool):
    """
    Check the least favorable pair of a jsb config against probe members
    """
    outcome = _run("jsb", config_path, seed, budget, out, check=check)
    _echo_json(outcome.reports["jsb"])


@cli.command(name="config")
def c_config():
    """
    Print the current configuration
    """
    config = AppConfig()
    click.echo(config.print(TomlFormatter()))


if __name__ == '__main__':
    cli()
