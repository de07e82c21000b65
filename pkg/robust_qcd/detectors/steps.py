import math
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, Iterable, Optional, Tuple

import numpy as np

from robust_qcd.distributions import ArrayOrFloat
from robust_qcd.detectors import (
    CusumSpec,
    CusumState,
    DetectorSpec,
    DetectorState,
    GlrSpec,
    GlrState,
    InvalidDetector,
    ShiryaevSpec,
    ShiryaevState,
    SrSpec,
    SrState,
)

Alarm = Any


def cusum_step(s: CusumState, llr: ArrayOrFloat) -> Tuple[CusumState, Alarm]:
    statistic = np.maximum(s.statistic, 0.0) + llr
    return replace(s, statistic=statistic, n=s.n + 1), statistic >= s.eta


def shiryaev_step(s: ShiryaevState, llr: ArrayOrFloat) -> Tuple[ShiryaevState, Alarm]:
    log_r = llr + np.logaddexp(s.log_r, 0.0) - math.log1p(-s.rho)
    result = replace(s, log_r=log_r, n=s.n + 1)
    return result, result.statistic >= s.eta


def sr_step(s: SrState, lr: ArrayOrFloat) -> Tuple[SrState, Alarm]:
    """
    :param lr: likelihood ratio (not its log) of the new observation
    """
    if np.any(np.asarray(lr) < 0):
        raise ValueError("likelihood ratio must be nonnegative")
    r = lr * (1.0 + s.r)
    return replace(s, r=r, n=s.n + 1), r >= s.eta


def glr_statistic(sums: np.ndarray, counts: np.ndarray, theta_lo: float, theta_hi: float) -> ArrayOrFloat:
    """
    max over start indices of sup_{theta in [lo, hi]} (theta * S_k - theta^2 * m_k / 2),
    with the supremum attained at theta* = clip(S_k / m_k, lo, hi).
    """
    if counts.size == 0:
        return np.full(sums.shape[:-1], -math.inf) if sums.ndim > 1 else -math.inf
    theta = np.clip(sums / counts, theta_lo, theta_hi)
    return np.max(theta * sums - theta ** 2 * counts / 2.0, axis=-1)


def glr_step(s: GlrState, x: ArrayOrFloat) -> Tuple[GlrState, Alarm]:
    column = np.asarray(x, dtype=float)[..., None]
    sums = np.concatenate([s.sums + column, column], axis=-1)
    counts = np.concatenate([s.counts + 1.0, [1.0]])
    if counts.size > s.window:
        sums, counts = sums[..., 1:], counts[1:]
    statistic = glr_statistic(sums, counts, s.theta_lo, s.theta_hi)
    return replace(s, sums=sums, counts=counts, n=s.n + 1, statistic=statistic), statistic >= s.eta


def _identity(x: ArrayOrFloat) -> ArrayOrFloat:
    return x


@dataclass(frozen=True)
class StoppingRule:
    """
    A detector spec bound to the log-likelihood ratio it accumulates.
    Without an llr the stream values are taken to be log-likelihood ratios already. The GLR rule always
    consumes raw observations.
    """
    spec: DetectorSpec
    llr: Optional[Callable[[ArrayOrFloat], ArrayOrFloat]] = None

    @property
    def family(self) -> str:
        return self.spec.family

    @property
    def eta(self) -> float:
        return self.spec.eta

    def with_eta(self, eta: float) -> "StoppingRule":
        return replace(self, spec=self.spec.with_eta(eta))

    def transform(self, x: ArrayOrFloat) -> ArrayOrFloat:
        """
        Maps raw observations to the input of the step function.
        """
        if isinstance(self.spec, GlrSpec):
            return x
        llr = (self.llr or _identity)(x)
        if isinstance(self.spec, SrSpec):
            return np.exp(llr)
        return llr

    def initial_state(self, size: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> DetectorState:
        return self.spec.initial_state(size, rng)

    def step(self, state: DetectorState, value: ArrayOrFloat) -> Tuple[DetectorState, Alarm]:
        if isinstance(self.spec, CusumSpec):
            return cusum_step(state, value)
        if isinstance(self.spec, ShiryaevSpec):
            return shiryaev_step(state, value)
        if isinstance(self.spec, SrSpec):
            return sr_step(state, value)
        if isinstance(self.spec, GlrSpec):
            return glr_step(state, value)
        raise InvalidDetector(f"Unknown detector spec {self.spec}")

    def describe(self) -> Dict[str, Any]:
        return self.spec.describe()


def run_to_alarm(rule: StoppingRule, stream: Iterable[float], max_len: int, state: Optional[DetectorState] = None,
                 rng: Optional[np.random.Generator] = None) -> Tuple[int, bool, DetectorState]:
    """
    Feeds a stream through a detector until it alarms.

    :param rule: the detector
    :param stream: raw observations (or log-likelihood ratios for a rule without llr)
    :param max_len: censoring horizon
    :param state: start state, the spec's initial state if omitted
    :param rng: generator for randomized start states
    :return: (tau, censored, final state); a censored run reports the number of observations consumed
    """
    if max_len < 1:
        raise ValueError(f"max_len must be at least 1, got {max_len}")
    if state is None:
        state = rule.initial_state(rng=rng)
    n = 0
    for x in stream:
        n += 1
        state, alarm = rule.step(state, rule.transform(x))
        if alarm:
            return n, False, state
        if n >= max_len:
            break
    return n, True, state
