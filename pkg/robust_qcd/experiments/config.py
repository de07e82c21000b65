import copy
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, Optional

from robust_qcd.distributions import Seed
from robust_qcd.experiments import EXPERIMENTS, Budget, ConfigError
from robust_qcd.util import calculate_md5_string, load_yaml_file

DEFAULT_SEED = 20240501
# config seed indices are shifted by 32 bits when calibrations and cells derive their own seeds
SEED_INDEX_LIMIT = 2 ** 32
DEFAULT_OUTPUT = "results"

_GAUSSIAN_0 = {"type": "gaussian", "mean": 0.0, "sd": 1.0}
_GAUSSIAN_1 = {"type": "gaussian", "mean": 1.0, "sd": 1.0}
_BAND = {"lo": 0.1, "hi": 3.0, "sd": 1.0}

# experiment section defaults, a config file only lists what it changes
DEFAULT_PARAMS: Dict[str, Dict[str, Any]] = {
    "table1": {
        "thetas": [0.1, 0.2, 0.4, 0.6, 1.0],
        "band": _BAND,
        "glr_window": 2000,
    },
    "table2": {
        "nominal0": _GAUSSIAN_0,
        "nominal1": _GAUSSIAN_1,
        "eps": [0.05, 0.005],
        "sigma0": 1.0,
        "sigma1": [0.1, 0.5, 1.0, 5.0, 10.0],
    },
    "table3": {
        "nominal0": _GAUSSIAN_0,
        "nominal1": _GAUSSIAN_1,
        "eps": [0.05, 0.005],
        "sigma0": [0.1, 0.5, 1.0, 5.0, 10.0],
        "sigma1": 1.0,
    },
    "bayes-curve": {
        "rho": 0.1,
        "thetas": [0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0],
        "band": _BAND,
    },
    "lfd": {
        "p0": {"type": "eps-contamination", "nominal": _GAUSSIAN_0, "eps": 0.05},
        "p1": {"type": "eps-contamination", "nominal": _GAUSSIAN_1, "eps": 0.05},
    },
    "jsb": {
        "p0": {"type": "eps-contamination", "nominal": _GAUSSIAN_0, "eps": 0.005},
        "p1": {"type": "eps-contamination", "nominal": _GAUSSIAN_1, "eps": 0.005},
        "probes": [],
        "tolerance": 0.01,
        "samples": 100_000,
    },
    "srp": {
        "theta0": 1.0,
        "theta_min": 2.0,
        "thetas": [2.0, 2.5, 3.0, 4.0],
        "r": 0.0,
        "lambda_grid": [1, 2, 5, 10, 50, 100, 500],
    },
    "far": {
        "nominal0": _GAUSSIAN_0,
        "nominal1": _GAUSSIAN_1,
        "eps": 0.05,
        "sigma0": [0.1, 0.5, 2.0, 5.0, 10.0],
    },
    "custom": {
        "p0": {"type": "singleton", "distribution": _GAUSSIAN_0},
        "p1": {"type": "gaussian-band", **_BAND},
        "detector": {"type": "cusum"},
        "mode": "far",
        "rho": 0.1,
        "metric": "wdd",
        "lambda_grid": None,
        "scenarios": [],
    },
}

TOP_LEVEL_KEYS = {"experiment", "name", "alpha", "seed", "budget", "output"}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    name: str
    alpha: float
    seed: Seed
    budget: Budget
    output: Path
    # experiment section with defaults filled in
    params: Dict[str, Any]

    def to_dict(self) -> Dict[str, Any]:
        """
        Resolved config, the output directory excluded.
        """
        return {
            "experiment": self.experiment,
            "name": self.name,
            "alpha": self.alpha,
            "seed": self.seed.to_dict(),
            "budget": self.budget.to_dict(),
            self.experiment: self.params,
        }

    @property
    def md5(self) -> str:
        return calculate_md5_string(self.to_dict())

    def with_overrides(self, seed: Optional[int] = None, budget: Optional[int] = None,
                       output: Optional[Path] = None) -> "ExperimentConfig":
        """
        :param seed: replaces the seed base
        :param budget: replaces the runs per cell, the calibration cap becomes ten times that, 0 means dry run
        :param output: replaces the output directory
        """
        result = self
        if seed is not None:
            result = replace(result, seed=_parse_seed(seed))
        if budget is not None:
            if budget < 0:
                raise ConfigError(f"budget must be nonnegative, got {budget}")
            result = replace(result, budget=Budget(runs_per_cell=budget, calibration_cap=10 * budget))
        if output is not None:
            result = replace(result, output=Path(output))
        return result


def _parse_seed(value: Any) -> Seed:
    try:
        if isinstance(value, dict):
            seed = Seed(base=value["base"], index=value.get("index", 0))
        else:
            seed = Seed(base=value)
    except (KeyError, TypeError, ValueError) as ex:
        raise ConfigError(f"invalid seed {value!r}: {ex}") from ex
    if seed.index >= SEED_INDEX_LIMIT:
        raise ConfigError(f"invalid seed {value!r}: index must be below {SEED_INDEX_LIMIT}")
    return seed


def _parse_budget(value: Any) -> Budget:
    if value is None:
        return Budget()
    if not isinstance(value, dict):
        raise ConfigError(f"budget must be a mapping, got {value!r}")
    unknown = set(value) - {"runs_per_cell", "calibration_cap"}
    if unknown:
        raise ConfigError(f"unknown budget keys: {sorted(unknown)}")
    try:
        budget = Budget(**{key: int(v) for key, v in value.items()})
    except (TypeError, ValueError) as ex:
        raise ConfigError(f"invalid budget {value}: {ex}") from ex
    if budget.runs_per_cell < 0 or budget.calibration_cap < 0:
        raise ConfigError(f"budget entries must be nonnegative: {value}")
    if 0 < budget.runs_per_cell < 100:
        raise ConfigError(f"runs_per_cell must be 0 (dry run) or at least 100, got {budget.runs_per_cell}")
    return budget


def parse_experiment_config(data: Dict[str, Any], default_name: Optional[str] = None) -> ExperimentConfig:
    """
    Validates the generic part of an experiment config and fills in defaults.
    Domain objects (distributions, classes, detectors) are validated when the experiment is planned.

    :param data: the parsed config mapping
    :param default_name: name used when the config has none
    :raises ConfigError: on any invalid entry
    """
    if not isinstance(data, dict):
        raise ConfigError("experiment config must be a mapping")
    experiment = data.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment '{experiment}', expected one of {', '.join(EXPERIMENTS)}")

    unknown = set(data) - TOP_LEVEL_KEYS - {experiment}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    try:
        alpha = float(data.get("alpha", 0.001))
    except (TypeError, ValueError) as ex:
        raise ConfigError(f"invalid alpha {data.get('alpha')!r}") from ex
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")

    section = data.get(experiment) or {}
    if not isinstance(section, dict):
        raise ConfigError(f"section '{experiment}' must be a mapping")
    defaults = DEFAULT_PARAMS[experiment]
    unknown = set(section) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in section '{experiment}': {sorted(unknown)}")
    params = copy.deepcopy(defaults) | copy.deepcopy(section)

    return ExperimentConfig(
        experiment=experiment,
        name=str(data.get("name") or default_name or experiment),
        alpha=alpha,
        seed=_parse_seed(data.get("seed", DEFAULT_SEED)),
        budget=_parse_budget(data.get("budget")),
        output=Path(data.get("output", DEFAULT_OUTPUT)),
        params=params,
    )


def load_experiment_config(file_path: Path) -> ExperimentConfig:
    """
    Loads an experiment config from a YAML file.
    """
    file_path = Path(file_path)
    if not file_path.is_file():
        raise ConfigError(f"config file not found: {file_path}")
    try:
        data = load_yaml_file(file_path)
    except Exception as ex:
        raise ConfigError(f"cannot parse '{file_path}': {ex}") from ex
    return parse_experiment_config(data, default_name=file_path.stem)


def default_experiment_config(experiment: str) -> ExperimentConfig:
    return parse_experiment_config({"experiment": experiment})
