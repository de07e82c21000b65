import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from robust_qcd.config import AppConfig
from robust_qcd.detectors.steps import StoppingRule
from robust_qcd.distributions import Distribution1D, Seed

# change index of a run without change
NEVER = np.iinfo(np.int64).max
# horizon of runs that end at their change point instead of a fixed length
UNBOUNDED = 2 ** 62

ChangeSampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class RunBatch:
    """
    Per-run outcome of a Monte-Carlo evaluation, in run order.
    """
    # alarm time, or the horizon for censored runs
    tau: np.ndarray
    censored: np.ndarray
    # index of the first post-change observation (NEVER without change)
    change: np.ndarray

    @staticmethod
    def concatenate(batches: Sequence["RunBatch"]) -> "RunBatch":
        return RunBatch(
            tau=np.concatenate([b.tau for b in batches]),
            censored=np.concatenate([b.censored for b in batches]),
            change=np.concatenate([b.change for b in batches]),
        )

    def __len__(self) -> int:
        return int(self.tau.size)


def fixed_change(index: int) -> ChangeSampler:
    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, index, dtype=np.int64)

    return sampler


def geometric_change(rho: float) -> ChangeSampler:
    """
    P(change = k) = rho (1 - rho)^(k - 1), k >= 1
    """
    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.geometric(rho, size=size).astype(np.int64)

    return sampler


class MonteCarloEngine:
    """
    Simulates independent detector runs. Runs are split into fixed-size chunks, each chunk draws from its own
    seeded stream and advances all its runs in lock-step, one vectorised block of observations at a time.
    Chunks are evaluated on a thread pool and reassembled in chunk order, so results do not depend on the
    number of threads.
    """
    LOGGER = logging.getLogger(__name__)

    def __init__(self, max_workers: Optional[int] = None, chunk_size: Optional[int] = None,
                 block_size: Optional[int] = None):
        self._max_workers = max_workers or AppConfig.MAX_WORKERS.value
        self._chunk_size = chunk_size or AppConfig.CHUNK_SIZE.value
        self._block_size = block_size or AppConfig.BLOCK_SIZE.value

    def run(
        self,
        rule: StoppingRule,
        nu0: Distribution1D,
        n_runs: int,
        max_len: int,
        seed: Seed,
        path: Tuple[int, ...] = (),
        nu1: Optional[Distribution1D] = None,
        change: Optional[ChangeSampler] = None,
        stop_at_change: bool = False,
    ) -> RunBatch:
        """
        :param rule: the detector
        :param nu0: pre-change law
        :param n_runs: number of runs
        :param max_len: censoring horizon
        :param seed: base seed
        :param path: spawn keys identifying this evaluation below the seed
        :param nu1: post-change law, required when change is given
        :param change: sampler of per-run change indices, no change if omitted
        :param stop_at_change: end each run (censored) right before its change point
        :return: per-run stopping times
        """
        if n_runs < 1:
            raise ValueError(f"n_runs must be at least 1, got {n_runs}")
        if change is not None and nu1 is None and not stop_at_change:
            raise ValueError("a change model needs a post-change law")
        sizes = [self._chunk_size] * (n_runs // self._chunk_size)
        if n_runs % self._chunk_size:
            sizes.append(n_runs % self._chunk_size)

        generators = [seed.generator(*path, index) for index in range(len(sizes))]
        with ThreadPoolExecutor(max_workers=min(self._max_workers, len(sizes))) as executor:
            futures = [
                executor.submit(self._run_chunk, rule, nu0, nu1, change, size, max_len, stop_at_change, rng)
                for size, rng in zip(sizes, generators)
            ]
            batches: List[RunBatch] = [future.result() for future in futures]
        return RunBatch.concatenate(batches)

    def _run_chunk(
        self,
        rule: StoppingRule,
        nu0: Distribution1D,
        nu1: Optional[Distribution1D],
        change: Optional[ChangeSampler],
        size: int,
        max_len: int,
        stop_at_change: bool,
        rng: np.random.Generator,
    ) -> RunBatch:
        change_index = change(rng, size) if change is not None else np.full(size, NEVER, dtype=np.int64)
        horizon = np.full(size, max_len, dtype=np.int64)
        if stop_at_change:
            horizon = np.minimum(horizon, change_index - 1)

        tau = horizon.copy()
        censored = np.ones(size, dtype=bool)
        state = rule.initial_state(size, rng)
        alive = horizon > 0
        active = np.flatnonzero(alive)
        if active.size < size:
            state = state.select(alive)

        n = 0
        while active.size and n < max_len:
            steps = min(self._block_size, max_len - n)
            times = n + 1 + np.arange(steps, dtype=np.int64)
            x = nu0.draw(rng, (active.size, steps))
            active_change = change_index[active]
            if nu1 is not None and np.any(active_change <= times[-1]):
                post = nu1.draw(rng, (active.size, steps))
                x = np.where(times[None, :] >= active_change[:, None], post, x)
            values = rule.transform(x)

            active_horizon = horizon[active]
            alarm_at = np.zeros(active.size, dtype=np.int64)
            for j in range(steps):
                state, alarm = rule.step(state, values[:, j])
                fresh = alarm & (alarm_at == 0) & (times[j] <= active_horizon)
                alarm_at[fresh] = times[j]
            n += steps

            hit = alarm_at > 0
            tau[active[hit]] = alarm_at[hit]
            censored[active[hit]] = False
            keep = ~hit & (active_horizon > n)
            active = active[keep]
            state = state.select(keep)

        return RunBatch(tau=tau, censored=censored, change=change_index)
