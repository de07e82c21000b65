import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Tuple, Union

import numpy as np

from robust_qcd.distributions import (
    ArrayOrFloat,
    Distribution1D,
    Exponential,
    Gaussian,
    InvalidDistribution,
    Mixture,
    log_ratio,
    parse_distribution,
)


class DegenerateClasses(ValueError):
    pass


class NonMonotoneLR(ValueError):
    pass


class UnsupportedClassPair(ValueError):
    pass


@dataclass(frozen=True)
class Singleton:
    d: Distribution1D

    def contains(self, d: Distribution1D) -> bool:
        return d == self.d

    def describe(self) -> Dict[str, Any]:
        return {"type": "singleton", "distribution": self.d.describe()}


@dataclass(frozen=True)
class GaussianMeanBand:
    """
    {N(theta, sd^2) : lo <= theta <= hi}
    """
    lo: float
    hi: float
    sd: float = 1.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InvalidDistribution(f"GaussianMeanBand needs lo < hi, got [{self.lo}, {self.hi}]")
        if not self.sd > 0:
            raise InvalidDistribution(f"GaussianMeanBand sd must be positive, got {self.sd}")

    def contains(self, d: Distribution1D) -> bool:
        return isinstance(d, Gaussian) and d.sd == self.sd and self.lo <= d.mean <= self.hi

    def describe(self) -> Dict[str, Any]:
        return {"type": "gaussian-band", "lo": self.lo, "hi": self.hi, "sd": self.sd}


@dataclass(frozen=True)
class ExpRateRay:
    """
    {Exp(theta) : theta >= theta_min}
    """
    theta_min: float

    def __post_init__(self):
        if not self.theta_min > 0:
            raise InvalidDistribution(f"ExpRateRay theta_min must be positive, got {self.theta_min}")

    def contains(self, d: Distribution1D) -> bool:
        return isinstance(d, Exponential) and d.theta >= self.theta_min

    def describe(self) -> Dict[str, Any]:
        return {"type": "exp-ray", "theta_min": self.theta_min}


@dataclass(frozen=True)
class EpsContamination:
    """
    {(1 - eps) nominal + eps H : H any law on the reals}
    """
    nominal: Distribution1D
    eps: float

    def __post_init__(self):
        if not 0.0 <= self.eps < 1.0:
            raise InvalidDistribution(f"eps must lie in [0, 1), got {self.eps}")

    def contains(self, d: Distribution1D) -> bool:
        if d == self.nominal:
            return True
        if not isinstance(d, Mixture):
            return False
        nominal_weight = math.fsum(w for w, c in zip(d.weights, d.components) if c == self.nominal)
        return nominal_weight >= 1.0 - self.eps - 1e-12

    def describe(self) -> Dict[str, Any]:
        return {"type": "eps-contamination", "nominal": self.nominal.describe(), "eps": self.eps}


UncertaintyClass = Union[Singleton, GaussianMeanBand, ExpRateRay, EpsContamination]


def parse_uncertainty_class(block: Dict[str, Any]) -> UncertaintyClass:
    """
    Builds an uncertainty class from its config block, e.g. {type: gaussian-band, lo: 0.1, hi: 3, sd: 1}.
    """
    if not isinstance(block, dict) or "type" not in block:
        raise InvalidDistribution(f"Uncertainty class block needs a 'type' key: {block}")
    kind = str(block["type"]).lower()
    try:
        if kind == "singleton":
            return Singleton(d=parse_distribution(block["distribution"]))
        if kind == "gaussian-band":
            return GaussianMeanBand(lo=float(block["lo"]), hi=float(block["hi"]), sd=float(block.get("sd", 1.0)))
        if kind == "exp-ray":
            return ExpRateRay(theta_min=float(block["theta_min"]))
        if kind == "eps-contamination":
            return EpsContamination(nominal=parse_distribution(block["nominal"]), eps=float(block["eps"]))
    except (KeyError, TypeError) as ex:
        raise InvalidDistribution(f"Malformed '{kind}' class block {block}: {ex}") from ex
    raise InvalidDistribution(f"Unknown uncertainty class type '{kind}'")


@dataclass(frozen=True)
class DensityLogRatio:
    nu0: Distribution1D
    nu1: Distribution1D

    def __call__(self, x: ArrayOrFloat) -> ArrayOrFloat:
        return log_ratio(self.nu0, self.nu1, x)


@dataclass(frozen=True)
class GaussianLogRatio:
    """
    log N(x; mean1, sd) - log N(x; mean0, sd) = slope * x + intercept
    """
    mean0: float
    mean1: float
    sd: float = 1.0

    @property
    def slope(self) -> float:
        return (self.mean1 - self.mean0) / self.sd ** 2

    @property
    def intercept(self) -> float:
        return -(self.mean1 ** 2 - self.mean0 ** 2) / (2.0 * self.sd ** 2)

    def __call__(self, x: ArrayOrFloat) -> ArrayOrFloat:
        return self.slope * x + self.intercept


@dataclass(frozen=True)
class CensoredLogRatio:
    """
    Nominal log-likelihood ratio clamped to [log a, log b].
    """
    p0: Distribution1D
    p1: Distribution1D
    a: float
    b: float

    def __call__(self, x: ArrayOrFloat) -> ArrayOrFloat:
        with np.errstate(divide="ignore"):
            lo, hi = np.log(self.a), np.log(self.b)
        result = np.clip(log_ratio(self.p0, self.p1, x), lo, hi)
        return float(result) if np.ndim(x) == 0 else result


@dataclass(frozen=True)
class LfdPair:
    nu0_bar: Distribution1D
    nu1_under: Distribution1D
    llr: Callable[[ArrayOrFloat], ArrayOrFloat] = field(compare=False)

    def describe(self) -> Dict[str, Any]:
        return {"nu0_bar": self.nu0_bar.describe(), "nu1_under": self.nu1_under.describe()}


@dataclass
class JsbReport:
    passed: bool
    # (member id, min over t of the CDF gap)
    margins: List[Tuple[str, float]]
    tolerance: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pass": self.passed,
            "margins": [{"member": member, "margin": margin} for member, margin in self.margins],
            "tolerance": self.tolerance,
        }
