from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

from robust_qcd.calibration import EstimateWithError
from robust_qcd.calibration.monte_carlo import ChangeSampler, fixed_change, geometric_change

DEFAULT_JSRP_GRID = (1, 2, 5, 10, 50, 100, 500)
DEFAULT_GLR_WDD_GRID = (1, 10, 100, 1000)


class NonInformative(ArithmeticError):
    pass


@dataclass(frozen=True)
class FixedLambda:
    lambda_: int

    def __post_init__(self):
        if self.lambda_ < 1:
            raise ValueError(f"change point must be at least 1, got {self.lambda_}")

    def sampler(self) -> ChangeSampler:
        return fixed_change(self.lambda_)


@dataclass(frozen=True)
class GeometricLambda:
    rho: float

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")

    def sampler(self) -> ChangeSampler:
        return geometric_change(self.rho)


ChangeModel = Union[FixedLambda, GeometricLambda]


class DelayMetric(str, Enum):
    WDD = "wdd"
    ADD = "add"
    JSRP = "jsrp"


@dataclass(frozen=True)
class DelayEstimate:
    metric: DelayMetric
    estimate: EstimateWithError
    lambda_grid: Optional[Tuple[int, ...]] = None
    # conditional estimate per grid point, aligned with lambda_grid
    per_lambda: List[EstimateWithError] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        result = {"metric": self.metric.value, "estimate": self.estimate.to_dict()}
        if self.lambda_grid is not None:
            result["lambda_grid"] = list(self.lambda_grid)
            result["per_lambda"] = [e.to_dict() for e in self.per_lambda]
        return result


@dataclass(frozen=True)
class AsymptoticBound:
    # |log alpha| / I, I = D(nu1 || nu0_bar) - D(nu1 || nu1_under)
    delay_bound: float
    # D(nu1 || nu0) / I
    factor: float
    # |log alpha| / D(nu1 || nu0)
    optimal_delay_bound: float
    information: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "delay_bound": self.delay_bound,
            "factor": self.factor,
            "optimal_delay_bound": self.optimal_delay_bound,
            "information": self.information,
        }
