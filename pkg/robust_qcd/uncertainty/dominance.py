import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple, Union

import numpy as np

from robust_qcd.distributions import Distribution1D, Seed
from robust_qcd.uncertainty import JsbReport, LfdPair, UncertaintyClass

LOGGER = logging.getLogger(__name__)

GRID_SIZE = 2048
REFINED_POINTS = 32
POINTS_PER_REFINEMENT = 16
GRID_LEVEL = 1e-4

JSB_TOLERANCE = 0.01
JSB_SAMPLES = 100_000

CdfSource = Union[Distribution1D, np.ndarray]


@dataclass(frozen=True)
class EmpiricalCdf:
    sorted_samples: np.ndarray

    @staticmethod
    def of(samples: np.ndarray) -> "EmpiricalCdf":
        return EmpiricalCdf(np.sort(np.asarray(samples, dtype=float).ravel()))

    def cdf(self, t: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.sorted_samples, t, side="right") / len(self.sorted_samples)

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.sorted_samples, q))


def _as_cdf(source: CdfSource):
    if isinstance(source, np.ndarray):
        return EmpiricalCdf.of(source)
    return source


def _grid(a, b) -> np.ndarray:
    lo = min(float(a.quantile(GRID_LEVEL)), float(b.quantile(GRID_LEVEL)))
    hi = max(float(a.quantile(1 - GRID_LEVEL)), float(b.quantile(1 - GRID_LEVEL)))
    if not hi > lo:
        return np.array([lo])
    coarse = np.linspace(lo, hi, GRID_SIZE - REFINED_POINTS * POINTS_PER_REFINEMENT)
    gap = np.asarray(b.cdf(coarse)) - np.asarray(a.cdf(coarse))
    closest = np.argsort(gap, kind="stable")[:REFINED_POINTS]
    refined = [
        np.linspace(coarse[max(i - 1, 0)], coarse[min(i + 1, len(coarse) - 1)], POINTS_PER_REFINEMENT + 2)[1:-1]
        for i in closest
    ]
    return np.unique(np.concatenate([coarse, *refined]))


def dominates(a: CdfSource, b: CdfSource, tolerance: float = 0.0) -> Tuple[bool, float]:
    """
    Checks whether a is stochastically larger than b, i.e. CDF_a(t) <= CDF_b(t) for all t.

    :param a: a distribution or a sample array (empirical CDF)
    :param b: a distribution or a sample array (empirical CDF)
    :param tolerance: allowed violation
    :return: (dominates, margin) where margin is min over the grid of CDF_b - CDF_a
    """
    cdf_a, cdf_b = _as_cdf(a), _as_cdf(b)
    grid = _grid(cdf_a, cdf_b)
    margin = float(np.min(np.asarray(cdf_b.cdf(grid)) - np.asarray(cdf_a.cdf(grid))))
    return margin >= -tolerance, margin


def _member_id(side: str, index: int, member: Distribution1D) -> str:
    fields = ", ".join(f"{k}={v}" for k, v in member.describe().items()
                       if k != "type" and not isinstance(v, (dict, list)))
    return f"{side}[{index}] {member.describe()['type']}({fields})"


def check_jsb(P0: UncertaintyClass, P1: UncertaintyClass, lfd: LfdPair, probe_members: Sequence[Distribution1D],
              tolerance: float = JSB_TOLERANCE, n_samples: int = JSB_SAMPLES, seed: Seed = Seed(0)) -> JsbReport:
    """
    Numerically checks joint stochastic boundedness of the least favorable pair against probe members.
    Under every probed pre-change law the LFD log-likelihood ratio must be stochastically smaller than
    under nu0_bar, under every probed post-change law larger than under nu1_under.

    :param probe_members: laws drawn from P0 or P1 (routed by membership)
    :return: the report, failures are recorded not raised
    """
    reference0 = lfd.llr(lfd.nu0_bar.draw(seed.generator(0, 0), n_samples))
    reference1 = lfd.llr(lfd.nu1_under.draw(seed.generator(0, 1), n_samples))

    margins: List[Tuple[str, float]] = []
    for index, member in enumerate(probe_members):
        in0, in1 = P0.contains(member), P1.contains(member)
        if not (in0 or in1):
            LOGGER.warning(f"probe {member.describe()} belongs to neither class, skipping")
            continue
        probe = lfd.llr(member.draw(seed.generator(1, index), n_samples))
        if in0:
            _, margin = dominates(reference0, probe, tolerance)
            margins.append((_member_id("P0", index, member), margin))
        if in1:
            _, margin = dominates(probe, reference1, tolerance)
            margins.append((_member_id("P1", index, member), margin))

    passed = all(margin >= -tolerance for _, margin in margins)
    return JsbReport(passed=passed, margins=margins, tolerance=tolerance)


def path_maximum(x: np.ndarray) -> np.ndarray:
    """
    max over 1 <= k <= n <= N of x_k + ... + x_n, taken along the last axis.
    """
    prefix = np.cumsum(x, axis=-1)
    zeros = np.zeros(x.shape[:-1] + (1,))
    previous = np.concatenate([zeros, prefix[..., :-1]], axis=-1)
    return np.max(prefix - np.minimum.accumulate(previous, axis=-1), axis=-1)


def check_functional_dominance(upper: Sequence[Distribution1D], lower: Sequence[Distribution1D],
                               functional: Callable[[np.ndarray], np.ndarray] = path_maximum,
                               n_samples: int = JSB_SAMPLES, tolerance: float = JSB_TOLERANCE,
                               seed: Seed = Seed(0)) -> Tuple[bool, float]:
    """
    Draws independent vectors U, V with U_i ~ upper[i] and V_i ~ lower[i] and checks that h(U)
    is stochastically larger than h(V) for a functional h nondecreasing in each component.

    :param upper: laws of U, each stochastically larger than its counterpart in lower
    :param lower: laws of V
    :return: (dominates, margin) as returned by dominates()
    """
    if len(upper) != len(lower) or len(upper) == 0:
        raise ValueError("upper and lower need the same, nonzero number of components")
    u = np.column_stack([d.draw(seed.generator(0, i), n_samples) for i, d in enumerate(upper)])
    v = np.column_stack([d.draw(seed.generator(1, i), n_samples) for i, d in enumerate(lower)])
    return dominates(functional(u), functional(v), tolerance)
