import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np

from robust_qcd.calibration import BracketFailure, CalibrationMode, CalibrationResult, EstimateWithError
from robust_qcd.calibration.monte_carlo import UNBOUNDED, MonteCarloEngine, geometric_change
from robust_qcd.config import AppConfig
from robust_qcd.detectors.steps import StoppingRule
from robust_qcd.distributions import Distribution1D, Seed

LOGGER = logging.getLogger(__name__)

MIN_RUNS = 100
CENSORING_WARNING_LEVEL = 0.01
# FAR runs are censored at this multiple of the target mean time to false alarm
MAX_LEN_FACTOR = 50
BRACKET_STEP = 2.0
MAX_BRACKET_EXPANSIONS = 25


def default_max_len(alpha: float) -> int:
    return int(math.ceil(MAX_LEN_FACTOR / alpha))


def _warn_censoring(estimate: EstimateWithError, what: str):
    if estimate.censored_fraction > CENSORING_WARNING_LEVEL:
        LOGGER.warning(f"{what}: {estimate.censored_fraction:.2%} of {estimate.n_runs} runs censored, "
                       f"estimate is biased low")


def estimate_mttfa(rule: StoppingRule, nu0: Distribution1D, n_runs: int, max_len: int, seed: Seed,
                   path: Tuple[int, ...] = (), engine: Optional[MonteCarloEngine] = None) -> EstimateWithError:
    """
    Mean time to false alarm under pure pre-change data, FAR = 1 / value.

    :param rule: the detector
    :param nu0: pre-change law generating all observations
    :param n_runs: number of runs (at least 100)
    :param max_len: censoring horizon
    :param seed: base seed
    :param path: spawn keys of this evaluation
    :return: the estimate
    """
    if n_runs < MIN_RUNS:
        raise ValueError(f"n_runs must be at least {MIN_RUNS}, got {n_runs}")
    engine = engine or MonteCarloEngine()
    batch = engine.run(rule, nu0, n_runs, max_len, seed, path)
    estimate = EstimateWithError.of(batch.tau, batch.censored, seed)
    _warn_censoring(estimate, f"mean time to false alarm of {rule.describe()}")
    return estimate


def estimate_pfa(rule: StoppingRule, nu0: Distribution1D, nu1: Optional[Distribution1D], rho: float, n_runs: int,
                 seed: Seed, path: Tuple[int, ...] = (),
                 engine: Optional[MonteCarloEngine] = None) -> EstimateWithError:
    """
    Probability of an alarm strictly before a geometric(rho) change point.
    Runs end right before their change point, so post-change data is never drawn and nu1 does not
    influence the estimate.
    """
    if n_runs < MIN_RUNS:
        raise ValueError(f"n_runs must be at least {MIN_RUNS}, got {n_runs}")
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    engine = engine or MonteCarloEngine()
    batch = engine.run(rule, nu0, n_runs, UNBOUNDED, seed, path, nu1=nu1, change=geometric_change(rho),
                       stop_at_change=True)
    false_alarm = ~batch.censored
    return EstimateWithError.of(false_alarm.astype(float), np.zeros(len(batch), dtype=bool), seed)


class _Search:
    """
    Threshold search state. Iterates are estimated with common random numbers per budget level,
    which keeps the estimate monotone in eta within a level.
    """

    def __init__(self, rule: StoppingRule, metric: Callable[[StoppingRule, int, Tuple[int, ...]], EstimateWithError],
                 mode: CalibrationMode, target: float, initial_runs: int, max_total_runs: int,
                 relative_tolerance: float, max_relative_stderr: float):
        self.rule = rule
        self.metric = metric
        self.mode = mode
        self.target = target
        self.runs = initial_runs
        self.level = 0
        self.spent = 0
        self.max_total_runs = max_total_runs
        self.relative_tolerance = relative_tolerance
        self.max_relative_stderr = max_relative_stderr
        self.history: List[Tuple[float, EstimateWithError]] = []

    def eta(self, coordinate: float) -> float:
        return math.exp(coordinate) if self.rule.spec.log_scale else coordinate

    def evaluate(self, coordinate: float) -> EstimateWithError:
        estimate = self.metric(self.rule.with_eta(self.eta(coordinate)), self.runs, (self.level,))
        self.spent += self.runs
        self.history.append((coordinate, estimate))
        LOGGER.debug(f"eta={self.eta(coordinate):.10g}: {self.mode.value} estimate {estimate.value:.6g} "
                     f"+/- {estimate.stderr:.3g} ({estimate.n_runs} runs)")
        return estimate

    def accepts(self, estimate: EstimateWithError) -> bool:
        slack = max(2.0 * estimate.stderr, self.relative_tolerance * self.target)
        return (abs(estimate.value - self.target) <= slack
                and estimate.stderr <= self.max_relative_stderr * self.target)

    def needs_larger_eta(self, estimate: EstimateWithError) -> bool:
        if self.mode is CalibrationMode.FAR:
            return estimate.value < self.target
        return estimate.value > self.target

    def affords(self, runs: int) -> bool:
        return self.spent + runs <= self.max_total_runs

    def refine(self):
        if self.affords(2 * self.runs):
            self.runs *= 2
            self.level += 1

    def result(self, coordinate: float, estimate: EstimateWithError, converged: bool = True) -> CalibrationResult:
        return CalibrationResult(eta=self.eta(coordinate), achieved=estimate, target=self.target, mode=self.mode,
                                 iterations=len(self.history), converged=converged)

    def best(self) -> CalibrationResult:
        top = max(estimate.n_runs for _, estimate in self.history)
        coordinate, estimate = min(
            ((c, e) for c, e in self.history if e.n_runs == top),
            key=lambda item: abs(item[1].value - self.target),
        )
        return self.result(coordinate, estimate, converged=False)


def calibrate_threshold(
    rule: StoppingRule,
    mode: CalibrationMode,
    alpha: float,
    nu0: Distribution1D,
    seed: Seed,
    nu1: Optional[Distribution1D] = None,
    rho: Optional[float] = None,
    max_total_runs: Optional[int] = None,
    initial_runs: Optional[int] = None,
    max_len: Optional[int] = None,
    engine: Optional[MonteCarloEngine] = None,
) -> CalibrationResult:
    """
    Searches the threshold meeting a false alarm target: bracket expansion in steps of 2 around
    log(1 / alpha), then bisection with the number of runs doubling on every refinement.
    Shiryaev-Roberts thresholds are searched on a log scale.

    :param rule: the detector, its current threshold is ignored
    :param mode: FAR (mean time to false alarm = 1 / alpha) or PFA (P(tau < change) = alpha)
    :param alpha: false alarm level in (0, 1)
    :param nu0: pre-change law
    :param seed: base seed
    :param nu1: post-change law (PFA mode)
    :param rho: geometric change point parameter (PFA mode)
    :param max_total_runs: cap on the runs spent by the whole search
    :param initial_runs: runs of the first iterates
    :param max_len: censoring horizon of FAR runs, 50 / alpha by default
    :return: the calibrated threshold; at the budget cap the best iterate, with converged = False
    :raises BracketFailure: if no threshold range straddling the target is found
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    mode = CalibrationMode(mode)
    engine = engine or MonteCarloEngine()

    if mode is CalibrationMode.FAR:
        target = 1.0 / alpha
        horizon = max_len or default_max_len(alpha)
        max_relative_stderr = AppConfig.CALIBRATION_FAR_MAX_RELATIVE_STDERR.value

        def metric(r: StoppingRule, runs: int, path: Tuple[int, ...]) -> EstimateWithError:
            return estimate_mttfa(r, nu0, runs, horizon, seed, path=path, engine=engine)
    else:
        if rho is None:
            raise ValueError("PFA calibration needs the change point parameter rho")
        target = alpha
        max_relative_stderr = AppConfig.CALIBRATION_PFA_MAX_RELATIVE_STDERR.value

        def metric(r: StoppingRule, runs: int, path: Tuple[int, ...]) -> EstimateWithError:
            return estimate_pfa(r, nu0, nu1, rho, runs, seed, path=path, engine=engine)

    search = _Search(
        rule=rule,
        metric=metric,
        mode=mode,
        target=target,
        initial_runs=initial_runs or AppConfig.CALIBRATION_INITIAL_RUNS.value,
        max_total_runs=max_total_runs or AppConfig.CALIBRATION_MAX_TOTAL_RUNS.value,
        relative_tolerance=AppConfig.CALIBRATION_RELATIVE_TOLERANCE.value,
        max_relative_stderr=max_relative_stderr,
    )
    max_iterations = AppConfig.CALIBRATION_MAX_ITERATIONS.value

    # bracket
    start = math.log(1.0 / alpha)
    estimate = search.evaluate(start)
    if search.accepts(estimate):
        return search.result(start, estimate)
    upward = search.needs_larger_eta(estimate)
    inner, outer = start, start
    for _ in range(MAX_BRACKET_EXPANSIONS):
        outer = inner + (BRACKET_STEP if upward else -BRACKET_STEP)
        estimate = search.evaluate(outer)
        if search.accepts(estimate):
            return search.result(outer, estimate)
        if search.needs_larger_eta(estimate) != upward:
            break
        inner = outer
    else:
        raise BracketFailure(f"no threshold straddles the {mode.value} target {target:.6g} for {rule.describe()}")
    lo, hi = (inner, outer) if upward else (outer, inner)

    # bisection
    while len(search.history) < max_iterations:
        search.refine()
        if not search.affords(search.runs):
            break
        middle = (lo + hi) / 2.0
        estimate = search.evaluate(middle)
        if search.accepts(estimate):
            return search.result(middle, estimate)
        if search.needs_larger_eta(estimate):
            lo = middle
        else:
            hi = middle

    result = search.best()
    LOGGER.warning(f"threshold search for {rule.describe()} stopped after {result.iterations} iterates "
                   f"({search.spent} runs) without meeting the tolerance, using eta={result.eta:.10g} "
                   f"with {mode.value} estimate {result.achieved.value:.6g} +/- {result.achieved.stderr:.3g}")
    return result
