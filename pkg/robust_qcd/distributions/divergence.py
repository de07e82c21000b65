import logging
import math

import numpy as np
from scipy import integrate

from robust_qcd.distributions import Distribution1D, Exponential, Gaussian

LOGGER = logging.getLogger(__name__)

DIVERGENCE_TOLERANCE = 1e-8

# probability levels of p used to split the integration range
_SPLIT_LEVELS = (1e-10, 1e-6, 1e-2, 0.5, 1 - 1e-2, 1 - 1e-6, 1 - 1e-10)


class DivergenceInfinite(ArithmeticError):
    pass


def kl_divergence(p: Distribution1D, q: Distribution1D, epsabs: float = DIVERGENCE_TOLERANCE) -> float:
    """
    Kullback-Leibler divergence D(p || q).
    Closed form for Gaussian/Gaussian and Exponential/Exponential pairs, adaptive quadrature otherwise.

    :raises DivergenceInfinite: when p puts mass where q has none
    """
    if isinstance(p, Gaussian) and isinstance(q, Gaussian):
        return (math.log(q.sd / p.sd)
                + (p.sd ** 2 + (p.mean - q.mean) ** 2) / (2.0 * q.sd ** 2)
                - 0.5)
    if isinstance(p, Exponential) and isinstance(q, Exponential):
        return math.log(p.theta / q.theta) + q.theta / p.theta - 1.0

    p_lo, p_hi = p.support
    q_lo, q_hi = q.support
    if p_lo < q_lo or p_hi > q_hi:
        raise DivergenceInfinite(f"support of {p.describe()} is not contained in support of {q.describe()}")

    def integrand(x: float) -> float:
        lp = float(p.log_density(x))
        if lp == -math.inf:
            return 0.0
        lq = float(q.log_density(x))
        if lq == -math.inf:
            raise DivergenceInfinite(f"q has zero density at x={x} where p is positive")
        return math.exp(lp) * (lp - lq)

    cuts = {float(c) for c in np.atleast_1d(p.quantile(np.asarray(_SPLIT_LEVELS)))}
    cuts |= {b for b in (*p.breakpoints, *q.breakpoints) if p_lo <= b <= p_hi}
    edges = [p_lo, *sorted(c for c in cuts if p_lo < c < p_hi), p_hi]

    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        value, _ = integrate.quad(integrand, lo, hi, epsabs=epsabs / len(edges), limit=200)
        if not math.isfinite(value):
            raise DivergenceInfinite(f"divergence integral diverged on [{lo}, {hi}]")
        total += value
    return max(total, 0.0)
