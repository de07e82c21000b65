import logging
import math
from typing import Tuple

import numpy as np
from scipy import optimize

from robust_qcd.distributions import Distribution1D, log_ratio, log_ratio_crossing
from robust_qcd.uncertainty import DegenerateClasses, NonMonotoneLR

LOGGER = logging.getLogger(__name__)

ROOT_TOLERANCE = 1e-12
DEGENERACY_TOLERANCE = 1e-6
MONOTONE_GRID_SIZE = 2048


def check_monotone_ratio(p0: Distribution1D, p1: Distribution1D) -> bool:
    """
    Checks on a grid over the pooled central range that L(x) = p1(x) / p0(x) is monotone.

    :return: True if increasing, False if decreasing
    :raises NonMonotoneLR: if the log ratio changes direction
    :raises DegenerateClasses: if the log ratio is constant (p0 == p1)
    """
    lo = min(p0.quantile(1e-4), p1.quantile(1e-4))
    hi = max(p0.quantile(1 - 1e-4), p1.quantile(1 - 1e-4))
    values = np.asarray(log_ratio(p0, p1, np.linspace(lo, hi, MONOTONE_GRID_SIZE)))
    steps = np.diff(values[np.isfinite(values)])
    scale = max(1.0, float(np.max(np.abs(values[np.isfinite(values)]), initial=0.0)))
    slack = 1e-12 * scale
    if np.all(np.abs(steps) <= slack):
        raise DegenerateClasses("nominal laws coincide, the likelihood ratio is constant")
    if np.all(steps >= -slack):
        return True
    if np.all(steps <= slack):
        return False
    raise NonMonotoneLR(f"likelihood ratio of {p1.describe()} to {p0.describe()} is not monotone")


def _region_masses(p0: Distribution1D, p1: Distribution1D, log_level: float, increasing: bool) -> Tuple[float, float]:
    """
    :return: (P0(L <= level), P1(L > level))
    """
    x = log_ratio_crossing(p0, p1, log_level)
    if increasing:
        return float(p0.cdf(x)), 1.0 - float(p1.cdf(x))
    return 1.0 - float(p0.cdf(x)), float(p1.cdf(x))


def _lhs_b(p0, p1, eps: float, b: float, increasing: bool) -> float:
    if b == math.inf:
        return 1.0 - eps
    low0, high1 = _region_masses(p0, p1, math.log(b), increasing)
    return (1.0 - eps) * (low0 + high1 / b)


def _lhs_a(p0, p1, eps: float, a: float, increasing: bool) -> float:
    if a == 0.0:
        return 1.0 - eps
    low0, high1 = _region_masses(p0, p1, math.log(a), increasing)
    return (1.0 - eps) * (high1 + a * low0)


def huber_residuals(p0: Distribution1D, p1: Distribution1D, eps: float, a: float, b: float) -> Tuple[float, float]:
    """
    :return: |lhs - 1| of the a-equation and the b-equation
    """
    increasing = check_monotone_ratio(p0, p1)
    return abs(_lhs_a(p0, p1, eps, a, increasing) - 1.0), abs(_lhs_b(p0, p1, eps, b, increasing) - 1.0)


def _solve(p0: Distribution1D, p1: Distribution1D, eps: float, increasing: bool) -> Tuple[float, float]:
    if eps == 0.0:
        return 0.0, math.inf

    # b-equation, decreasing in t = log b
    def f_b(t: float) -> float:
        return _lhs_b(p0, p1, eps, math.exp(t), increasing) - 1.0

    lo, hi, step = 0.0, 1.0, 1.0
    while f_b(lo) < 0:
        lo -= step
        step *= 2
        if step > 2 ** 12:
            raise DegenerateClasses(f"no censoring threshold b for eps={eps}")
    step = 1.0
    while f_b(hi) > 0:
        hi += step
        step *= 2
        if step > 2 ** 12:
            raise DegenerateClasses(f"no censoring threshold b for eps={eps}")
    b = math.exp(optimize.bisect(f_b, lo, hi, xtol=ROOT_TOLERANCE))

    # a-equation, increasing in a with value -eps at a = 0
    def f_a(a: float) -> float:
        return _lhs_a(p0, p1, eps, a, increasing) - 1.0

    hi = 1.0
    while f_a(hi) < 0:
        hi *= 2
        if hi > 2 ** 60:
            raise DegenerateClasses(f"no censoring threshold a for eps={eps}")
    a = optimize.bisect(f_a, 0.0, hi, xtol=ROOT_TOLERANCE)
    return a, b


def degeneracy_limit(p0: Distribution1D, p1: Distribution1D, tolerance: float = DEGENERACY_TOLERANCE) -> float:
    """
    Largest eps for which the censoring thresholds still satisfy a < b.
    """
    increasing = check_monotone_ratio(p0, p1)

    def gap(eps: float) -> float:
        a, b = _solve(p0, p1, eps, increasing)
        return math.log(b) - math.log(a)

    return optimize.bisect(gap, 1e-9, 1.0 - 1e-9, xtol=tolerance)


def huber_thresholds(p0: Distribution1D, p1: Distribution1D, eps: float) -> Tuple[float, float]:
    """
    Solves the two integral equations fixing the censoring thresholds of the least favorable
    eps-contamination pair around the nominal densities p0, p1.

    :param p0: nominal pre-change law
    :param p1: nominal post-change law
    :param eps: contamination level in [0, 1)
    :return: (a, b), (0, inf) when eps = 0
    :raises NonMonotoneLR: if p1 / p0 is not monotone
    :raises DegenerateClasses: if eps is so large that the classes overlap (no a < b)
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {eps}")
    increasing = check_monotone_ratio(p0, p1)
    try:
        a, b = _solve(p0, p1, eps, increasing)
    except DegenerateClasses:
        a, b = math.inf, 0.0
    if not a < b:
        limit = degeneracy_limit(p0, p1)
        raise DegenerateClasses(f"eps={eps} makes the classes overlap (a={a:.6g} >= b={b:.6g}); "
                                f"eps must stay below {limit:.6g}")
    LOGGER.debug(f"huber thresholds for eps={eps}: a={a:.12g}, b={b:.12g}")
    return a, b
