import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict

import numpy as np

from robust_qcd.distributions import Seed


class BracketFailure(RuntimeError):
    pass


class CalibrationMode(str, Enum):
    # mean time to false alarm = 1 / alpha
    FAR = "far"
    # P(tau < change point) = alpha
    PFA = "pfa"


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    stderr: float
    n_runs: int
    censored_fraction: float
    seed: Seed

    @staticmethod
    def of(samples: np.ndarray, censored: np.ndarray, seed: Seed) -> "EstimateWithError":
        """
        Mean of i.i.d. per-run values with stderr = sample standard deviation / sqrt(n).
        """
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        if n == 0:
            return EstimateWithError(value=math.nan, stderr=math.nan, n_runs=0, censored_fraction=0.0, seed=seed)
        stderr = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        return EstimateWithError(
            value=float(np.mean(samples)),
            stderr=stderr,
            n_runs=int(n),
            censored_fraction=float(np.mean(censored)) if np.size(censored) else 0.0,
            seed=seed,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "stderr": self.stderr,
            "n_runs": self.n_runs,
            "censored_fraction": self.censored_fraction,
            "seed": self.seed.to_dict(),
        }

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "EstimateWithError":
        return EstimateWithError(
            value=float(data["value"]),
            stderr=float(data["stderr"]),
            n_runs=int(data["n_runs"]),
            censored_fraction=float(data["censored_fraction"]),
            seed=Seed(**data["seed"]),
        )


@dataclass(frozen=True)
class CalibrationResult:
    eta: float
    achieved: EstimateWithError
    target: float
    mode: CalibrationMode
    iterations: int
    # False when the search hit its budget cap and returned the best iterate
    converged: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eta": self.eta,
            "achieved": self.achieved.to_dict(),
            "target": self.target,
            "mode": self.mode.value,
            "iterations": self.iterations,
            "converged": self.converged,
        }
