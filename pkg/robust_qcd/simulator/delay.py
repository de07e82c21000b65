import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np

from robust_qcd.calibration import EstimateWithError
from robust_qcd.calibration.monte_carlo import MonteCarloEngine, fixed_change
from robust_qcd.detectors import GlrSpec
from robust_qcd.detectors.steps import StoppingRule
from robust_qcd.distributions import Distribution1D, Seed
from robust_qcd.simulator import DEFAULT_GLR_WDD_GRID, DEFAULT_JSRP_GRID, DelayEstimate, DelayMetric, GeometricLambda

LOGGER = logging.getLogger(__name__)

DELAY_MAX_LEN = 100_000
MIN_CONDITIONED_RUNS = 100
CENSORING_WARNING_LEVEL = 0.01


def _warn_censoring(estimate: EstimateWithError, what: str):
    if estimate.censored_fraction > CENSORING_WARNING_LEVEL:
        LOGGER.warning(f"{what}: {estimate.censored_fraction:.2%} of {estimate.n_runs} runs censored")


def _conditional_delays(rule: StoppingRule, nu0: Distribution1D, nu1: Distribution1D, lambda_grid: Sequence[int],
                        offset: int, n_runs: int, seed: Seed, path: Tuple[int, ...], max_len: int,
                        engine: MonteCarloEngine) -> Tuple[EstimateWithError, ...]:
    """
    For each change point lambda, mean of (tau - lambda + offset) over the runs with tau >= lambda.
    """
    estimates = []
    for index, lambda_ in enumerate(lambda_grid):
        if lambda_ < 1:
            raise ValueError(f"change points must be at least 1, got {lambda_}")
        batch = engine.run(rule, nu0, n_runs, max_len + lambda_ - 1, seed, (*path, index), nu1=nu1,
                           change=fixed_change(lambda_))
        retained = batch.tau >= lambda_
        if retained.sum() < MIN_CONDITIONED_RUNS:
            LOGGER.warning(f"change point {lambda_}: only {int(retained.sum())} of {n_runs} runs "
                           f"survive until the change")
        estimate = EstimateWithError.of(batch.tau[retained] - lambda_ + offset, batch.censored[retained], seed)
        _warn_censoring(estimate, f"delay at change point {lambda_}")
        estimates.append(estimate)
    return tuple(estimates)


def _maximum(estimates: Sequence[EstimateWithError]) -> EstimateWithError:
    valid = [e for e in estimates if e.n_runs > 0 and not math.isnan(e.value)]
    if not valid:
        return estimates[0]
    return max(valid, key=lambda e: e.value)


def estimate_wdd(rule: StoppingRule, nu0: Distribution1D, nu1: Distribution1D, n_runs: int, seed: Seed,
                 path: Tuple[int, ...] = (), max_len: int = DELAY_MAX_LEN,
                 lambda_grid: Optional[Sequence[int]] = None,
                 engine: Optional[MonteCarloEngine] = None) -> DelayEstimate:
    """
    Worst-case detection delay.

    Without a lambda_grid, CUSUM, Shiryaev and SR rules are measured with the change at lambda = 1, right from
    their initial state. For CUSUM that state is the least favorable one, for Shiryaev and SR it is a fixed
    protocol and not a bound over all change points. GLR rules, or any rule given a lambda_grid, take the
    maximum over the grid of E[tau - lambda + 1 | tau >= lambda] with genuine pre-change prefixes.
    """
    engine = engine or MonteCarloEngine()
    if isinstance(rule.spec, GlrSpec) or lambda_grid is not None:
        grid = tuple(lambda_grid or DEFAULT_GLR_WDD_GRID)
        per_lambda = _conditional_delays(rule, nu0, nu1, grid, 1, n_runs, seed, path, max_len, engine)
        return DelayEstimate(metric=DelayMetric.WDD, estimate=_maximum(per_lambda), lambda_grid=grid,
                             per_lambda=list(per_lambda))

    batch = engine.run(rule, nu0, n_runs, max_len, seed, path, nu1=nu1, change=fixed_change(1))
    estimate = EstimateWithError.of(batch.tau, batch.censored, seed)
    _warn_censoring(estimate, f"worst-case delay of {rule.describe()}")
    return DelayEstimate(metric=DelayMetric.WDD, estimate=estimate)


def estimate_add(rule: StoppingRule, nu0: Distribution1D, nu1: Distribution1D, rho: float, n_runs: int, seed: Seed,
                 path: Tuple[int, ...] = (), max_len: int = DELAY_MAX_LEN,
                 engine: Optional[MonteCarloEngine] = None) -> DelayEstimate:
    """
    Average detection delay E[(tau - change)^+] with a change point resampled from geometric(rho) for every run.
    """
    engine = engine or MonteCarloEngine()
    change = GeometricLambda(rho)
    batch = engine.run(rule, nu0, n_runs, max_len, seed, path, nu1=nu1, change=change.sampler())
    delays = np.maximum(batch.tau - batch.change, 0)
    estimate = EstimateWithError.of(delays, batch.censored, seed)
    _warn_censoring(estimate, f"average delay of {rule.describe()}")
    return DelayEstimate(metric=DelayMetric.ADD, estimate=estimate)


def estimate_jsrp(rule: StoppingRule, nu0: Distribution1D, nu1: Distribution1D, n_runs: int, seed: Seed,
                  lambda_grid: Sequence[int] = DEFAULT_JSRP_GRID, path: Tuple[int, ...] = (),
                  max_len: int = DELAY_MAX_LEN, engine: Optional[MonteCarloEngine] = None) -> DelayEstimate:
    """
    sup over the grid of E[tau - lambda | tau >= lambda].
    """
    grid = tuple(lambda_grid)
    if not grid:
        raise ValueError("lambda grid must not be empty")
    engine = engine or MonteCarloEngine()
    per_lambda = _conditional_delays(rule, nu0, nu1, grid, 0, n_runs, seed, path, max_len, engine)
    return DelayEstimate(metric=DelayMetric.JSRP, estimate=_maximum(per_lambda), lambda_grid=grid,
                         per_lambda=list(per_lambda))
