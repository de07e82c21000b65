import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy import optimize, stats
from scipy.special import logsumexp

from robust_qcd.distributions.sampling import InverseCdfTable, Seed, build_inverse_cdf_table, sample

ArrayOrFloat = Union[float, np.ndarray]

MIXTURE_WEIGHT_TOLERANCE = 1e-12


class InvalidDistribution(ValueError):
    pass


class SamplingTableMissing(RuntimeError):
    pass


def _as_output(x: Any, result: np.ndarray) -> ArrayOrFloat:
    if np.ndim(x) == 0:
        return float(result)
    return result


def _bracketed_root(func, lo: float, hi: float, xtol: float = 1e-12) -> float:
    """
    Finds a root of a monotone function by expanding [lo, hi] geometrically until it changes sign.

    :param func: the function whose root to find
    :param lo: initial lower end
    :param hi: initial upper end
    :return: the root, or +/-inf if no sign change is found within 2^60
    """
    f_lo, f_hi = func(lo), func(hi)
    width = max(hi - lo, 1.0)
    for _ in range(60):
        if np.sign(f_lo) != np.sign(f_hi):
            return optimize.brentq(func, lo, hi, xtol=xtol)
        if abs(f_lo) < abs(f_hi):
            lo -= width
            f_lo = func(lo)
        else:
            hi += width
            f_hi = func(hi)
        width *= 2
    return -math.inf if abs(f_lo) < abs(f_hi) else math.inf


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not self.sd > 0:
            raise InvalidDistribution(f"Gaussian sd must be positive, got {self.sd}")

    @property
    def support(self) -> Tuple[float, float]:
        return -math.inf, math.inf

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return ()

    def log_density(self, x: ArrayOrFloat) -> ArrayOrFloat:
        return _as_output(x, stats.norm.logpdf(x, loc=self.mean, scale=self.sd))

    def cdf(self, x: ArrayOrFloat) -> ArrayOrFloat:
        return _as_output(x, stats.norm.cdf(x, loc=self.mean, scale=self.sd))

    def quantile(self, q: ArrayOrFloat) -> ArrayOrFloat:
        return _as_output(q, stats.norm.ppf(q, loc=self.mean, scale=self.sd))

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.normal(loc=self.mean, scale=self.sd, size=size)

    def describe(self) -> Dict[str, Any]:
        return {"type": "gaussian", "mean": self.mean, "sd": self.sd}


@dataclass(frozen=True)
class Exponential:
    # rate parameter, mean is 1 / theta
    theta: float = 1.0

    def __post_init__(self):
        if not self.theta > 0:
            raise InvalidDistribution(f"Exponential theta must be positive, got {self.theta}")

    @property
    def support(self) -> Tuple[float, float]:
        return 0.0, math.inf

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return 0.0,

    def log_density(self, x: ArrayOrFloat) -> ArrayOrFloat:
        return _as_output(x, stats.expon.logpdf(x, scale=1.0 / self.theta))

    def cdf(self, x: ArrayOrFloat) -> ArrayOrFloat:
        return _as_output(x, stats.expon.cdf(x, scale=1.0 / self.theta))

    def quantile(self, q: ArrayOrFloat) -> ArrayOrFloat:
        return _as_output(q, stats.expon.ppf(q, scale=1.0 / self.theta))

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.exponential(scale=1.0 / self.theta, size=size)

    def describe(self) -> Dict[str, Any]:
        return {"type": "exponential", "theta": self.theta}


@dataclass(frozen=True)
class Mixture:
    weights: Tuple[float, ...]
    components: Tuple["Distribution1D", ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.weights) == 0 or len(self.weights) != len(self.components):
            raise InvalidDistribution("Mixture needs one weight per component and at least one component")
        if any(w < 0 for w in self.weights):
            raise InvalidDistribution(f"Mixture weights must be nonnegative, got {self.weights}")
        if abs(math.fsum(self.weights) - 1.0) > MIXTURE_WEIGHT_TOLERANCE:
            raise InvalidDistribution(f"Mixture weights must sum to 1, got {math.fsum(self.weights)}")

    @property
    def support(self) -> Tuple[float, float]:
        supports = [c.support for c, w in zip(self.components, self.weights) if w > 0]
        return min(s[0] for s in supports), max(s[1] for s in supports)

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return tuple(sorted({p for c in self.components for p in c.breakpoints}))

    def log_density(self, x: ArrayOrFloat) -> ArrayOrFloat:
        x_arr = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            log_weights = np.log(np.asarray(self.weights))
        terms = np.stack([
            lw + np.asarray(c.log_density(x_arr)) for lw, c in zip(log_weights, self.components)
        ])
        return _as_output(x, logsumexp(terms, axis=0))

    def cdf(self, x: ArrayOrFloat) -> ArrayOrFloat:
        x_arr = np.asarray(x, dtype=float)
        total = sum(w * np.asarray(c.cdf(x_arr)) for w, c in zip(self.weights, self.components))
        return _as_output(x, np.clip(total, 0.0, 1.0))

    def quantile(self, q: ArrayOrFloat) -> ArrayOrFloat:
        return _numerical_quantile(self, q)

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        n = int(np.prod(size))
        labels = rng.choice(len(self.components), size=n, p=np.asarray(self.weights))
        out = np.empty(n)
        for i, component in enumerate(self.components):
            mask = labels == i
            count = int(mask.sum())
            if count:
                out[mask] = component.draw(rng, count)
        return out.reshape(size)

    def describe(self) -> Dict[str, Any]:
        return {
            "type": "mixture",
            "weights": list(self.weights),
            "components": [c.describe() for c in self.components],
        }


def log_ratio(p0: "Distribution1D", p1: "Distribution1D", x: ArrayOrFloat) -> ArrayOrFloat:
    """
    Nominal log-likelihood ratio log p1(x) - log p0(x). Points where both densities vanish map to nan.
    """
    with np.errstate(invalid="ignore"):
        return np.asarray(p1.log_density(x)) - np.asarray(p0.log_density(x))


def log_ratio_is_increasing(p0: "Distribution1D", p1: "Distribution1D") -> bool:
    lo = min(p0.quantile(1e-6), p1.quantile(1e-6))
    hi = max(p0.quantile(1 - 1e-6), p1.quantile(1 - 1e-6))
    return bool(log_ratio(p0, p1, hi) >= log_ratio(p0, p1, lo))


def log_ratio_crossing(p0: "Distribution1D", p1: "Distribution1D", level: float) -> float:
    """
    Point x at which the (monotone) nominal log-likelihood ratio crosses the given level.

    :return: the crossing point; +/-inf when the level is outside the range of the log ratio
    """
    if math.isinf(level):
        increasing = log_ratio_is_increasing(p0, p1)
        return math.inf if (level > 0) == increasing else -math.inf
    lo = max(min(p0.quantile(1e-3), p1.quantile(1e-3)), max(p0.support[0], p1.support[0]))
    hi = max(p0.quantile(1 - 1e-3), p1.quantile(1 - 1e-3))

    def shifted(x: float) -> float:
        value = float(log_ratio(p0, p1, x))
        return 0.0 - level if math.isnan(value) else value - level

    return _bracketed_root(shifted, lo, hi)


def _interval_mass(d: "Distribution1D", lo: float, hi: float) -> np.ndarray:
    return np.clip(np.asarray(d.cdf(hi)) - np.asarray(d.cdf(lo)), 0.0, 1.0)


@dataclass(frozen=True)
class _HuberCensored:
    p0: "Distribution1D"
    p1: "Distribution1D"
    eps: float
    table: Optional[InverseCdfTable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.eps < 1.0:
            raise InvalidDistribution(f"eps must lie in [0, 1), got {self.eps}")

    @property
    def _level(self) -> float:
        raise NotImplementedError

    @cached_property
    def increasing(self) -> bool:
        return log_ratio_is_increasing(self.p0, self.p1)

    @cached_property
    def boundary(self) -> float:
        return log_ratio_crossing(self.p0, self.p1, self._level)

    @property
    def support(self) -> Tuple[float, float]:
        return min(self.p0.support[0], self.p1.support[0]), max(self.p0.support[1], self.p1.support[1])

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        points = set(self.p0.breakpoints) | set(self.p1.breakpoints)
        if math.isfinite(self.boundary):
            points.add(self.boundary)
        return tuple(sorted(points))

    def _regions(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        # (interval where L <= level, interval where L > level)
        if self.increasing:
            return (-math.inf, self.boundary), (self.boundary, math.inf)
        return (self.boundary, math.inf), (-math.inf, self.boundary)

    def quantile(self, q: ArrayOrFloat) -> ArrayOrFloat:
        return _numerical_quantile(self, q)

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.table is None:
            raise SamplingTableMissing(
                f"{type(self).__name__} samples from a tabulated inverse CDF, call with_sampling_table() first")
        return self.table.draw(rng, size)

    def with_sampling_table(self, min_knots: int = 4096) -> "_HuberCensored":
        table = build_inverse_cdf_table(self, refine_at=self.breakpoints, min_knots=min_knots)
        return replace(self, table=table)


@dataclass(frozen=True)
class HuberCensored0(_HuberCensored):
    """
    Least favorable pre-change law of an eps-contamination pair:
    (1 - eps) p0 where L <= b and (1 - eps) p1 / b where L > b.
    """
    b: float = math.inf

    def __post_init__(self):
        super().__post_init__()
        if not self.b > 0:
            raise InvalidDistribution(f"b must be positive, got {self.b}")

    @property
    def _level(self) -> float:
        return math.log(self.b)

    def log_density(self, x: ArrayOrFloat) -> ArrayOrFloat:
        lp0 = np.asarray(self.p0.log_density(x))
        lp1 = np.asarray(self.p1.log_density(x))
        with np.errstate(invalid="ignore"):
            below = ~(lp1 - lp0 > self._level)
            result = math.log1p(-self.eps) + np.where(below, lp0, lp1 - self._level)
        return _as_output(x, result)

    def cdf(self, x: ArrayOrFloat) -> ArrayOrFloat:
        x_arr = np.asarray(x, dtype=float)
        (lo0, hi0), (lo1, hi1) = self._regions()
        mass = (_interval_mass(self.p0, lo0, np.clip(x_arr, lo0, hi0))
                + _interval_mass(self.p1, lo1, np.clip(x_arr, lo1, hi1)) / self.b)
        return _as_output(x, np.clip((1.0 - self.eps) * mass, 0.0, 1.0))

    def describe(self) -> Dict[str, Any]:
        return {"type": "huber-censored-0", "p0": self.p0.describe(), "p1": self.p1.describe(),
                "eps": self.eps, "b": self.b}


@dataclass(frozen=True)
class HuberCensored1(_HuberCensored):
    """
    Least favorable post-change law of an eps-contamination pair:
    (1 - eps) p1 where L > a and a (1 - eps) p0 where L <= a.
    """
    a: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        if self.a < 0:
            raise InvalidDistribution(f"a must be nonnegative, got {self.a}")

    @property
    def _level(self) -> float:
        return math.log(self.a) if self.a > 0 else -math.inf

    def log_density(self, x: ArrayOrFloat) -> ArrayOrFloat:
        lp0 = np.asarray(self.p0.log_density(x))
        lp1 = np.asarray(self.p1.log_density(x))
        with np.errstate(invalid="ignore", divide="ignore"):
            above = lp1 - lp0 > self._level
            result = math.log1p(-self.eps) + np.where(above, lp1, self._level + lp0)
        return _as_output(x, result)

    def cdf(self, x: ArrayOrFloat) -> ArrayOrFloat:
        x_arr = np.asarray(x, dtype=float)
        (lo0, hi0), (lo1, hi1) = self._regions()
        mass = (self.a * _interval_mass(self.p0, lo0, np.clip(x_arr, lo0, hi0))
                + _interval_mass(self.p1, lo1, np.clip(x_arr, lo1, hi1)))
        return _as_output(x, np.clip((1.0 - self.eps) * mass, 0.0, 1.0))

    def describe(self) -> Dict[str, Any]:
        return {"type": "huber-censored-1", "p0": self.p0.describe(), "p1": self.p1.describe(),
                "eps": self.eps, "a": self.a}


Distribution1D = Union[Gaussian, Exponential, Mixture, HuberCensored0, HuberCensored1]


def _numerical_quantile(d: Distribution1D, q: ArrayOrFloat) -> ArrayOrFloat:
    q_arr = np.atleast_1d(np.asarray(q, dtype=float))
    lo_support, hi_support = d.support
    out = np.empty_like(q_arr)
    for i, level in enumerate(q_arr):
        if level <= 0.0:
            out[i] = lo_support
        elif level >= 1.0:
            out[i] = hi_support
        else:
            start = 0.0 if math.isinf(lo_support) else lo_support
            out[i] = _bracketed_root(lambda t: float(d.cdf(t)) - level, start, start + 1.0)
    return float(out[0]) if np.ndim(q) == 0 else out


def log_density(d: Distribution1D, x: ArrayOrFloat) -> ArrayOrFloat:
    """
    Natural-log density of d at x, -inf where the density is zero.
    """
    return d.log_density(x)


def cdf(d: Distribution1D, x: ArrayOrFloat) -> ArrayOrFloat:
    return d.cdf(x)


def quantile(d: Distribution1D, q: ArrayOrFloat) -> ArrayOrFloat:
    return d.quantile(q)


def describe(d: Distribution1D) -> Dict[str, Any]:
    return d.describe()


def parse_distribution(block: Dict[str, Any]) -> Distribution1D:
    """
    Builds a distribution from its config block, e.g. {type: gaussian, mean: 0, sd: 1}.

    :param block: the parsed config mapping
    :return: the distribution
    """
    if not isinstance(block, dict) or "type" not in block:
        raise InvalidDistribution(f"Distribution block needs a 'type' key: {block}")
    kind = str(block["type"]).lower()
    try:
        if kind == "gaussian":
            return Gaussian(mean=float(block.get("mean", 0.0)), sd=float(block.get("sd", 1.0)))
        if kind == "exponential":
            return Exponential(theta=float(block.get("theta", 1.0)))
        if kind == "mixture":
            return Mixture(
                weights=tuple(float(w) for w in block["weights"]),
                components=tuple(parse_distribution(c) for c in block["components"]),
            )
    except (KeyError, TypeError) as ex:
        raise InvalidDistribution(f"Malformed '{kind}' distribution block {block}: {ex}") from ex
    raise InvalidDistribution(f"Unknown distribution type '{kind}'")


def contaminated(nominal: Distribution1D, eps: float, contaminant: Distribution1D) -> Mixture:
    """
    (1 - eps) * nominal + eps * contaminant
    """
    return Mixture(weights=(1.0 - eps, eps), components=(nominal, contaminant))
