from dataclasses import dataclass
from typing import Any, Dict, Sequence

import numpy as np

UINT64_MAX = 2 ** 64 - 1


@dataclass(frozen=True)
class Seed:
    """
    Reproducible random stream identifier.
    The same (base, index) pair, together with the same derivation path, reproduces the same stream bit-exactly.
    """
    base: int
    index: int = 0

    def __post_init__(self):
        for name in ("base", "index"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= int(value) <= UINT64_MAX:
                raise ValueError(f"Seed {name} must be an unsigned 64-bit integer, got {value!r}")
            object.__setattr__(self, name, int(value))

    def generator(self, *path: int) -> np.random.Generator:
        """
        :param path: additional spawn keys identifying a sub-stream (iteration, chunk, ...)
        :return: an independent PCG64 generator for this seed and path
        """
        sequence = np.random.SeedSequence(entropy=self.base, spawn_key=(self.index, *[int(p) for p in path]))
        return np.random.Generator(np.random.PCG64(sequence))

    def child(self, index: int) -> "Seed":
        return Seed(base=self.base, index=index)

    def to_dict(self) -> Dict[str, Any]:
        return {"base": self.base, "index": self.index}


@dataclass(frozen=True)
class InverseCdfTable:
    # strictly increasing probability levels and the matching quantiles
    levels: np.ndarray
    knots: np.ndarray

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.interp(rng.random(size=size), self.levels, self.knots)


def build_inverse_cdf_table(d, refine_at: Sequence[float] = (), min_knots: int = 4096,
                            tail: float = 1e-12) -> InverseCdfTable:
    """
    Tabulates the CDF of d on an adaptive grid: uniform over the central range plus extra knots
    clustered around the given points (censoring boundaries).

    :param d: a distribution exposing cdf and quantile
    :param refine_at: points near which the grid is refined
    :param min_knots: number of uniform knots
    :param tail: probability mass left out in each tail
    :return: the table
    """
    lo = float(d.quantile(tail))
    hi = float(d.quantile(1.0 - tail))
    grids = [np.linspace(lo, hi, min_knots)]
    span = hi - lo
    for point in refine_at:
        if lo < point < hi:
            grids.append(np.linspace(max(lo, point - 0.05 * span), min(hi, point + 0.05 * span), min_knots // 4))
    knots = np.unique(np.concatenate(grids))
    levels = np.asarray(d.cdf(knots), dtype=float)
    levels, first = np.unique(levels, return_index=True)
    knots = knots[first]
    # pin the end points so uniform draws never fall outside the table
    levels = np.concatenate(([0.0], levels, [1.0]))
    knots = np.concatenate(([knots[0]], knots, [knots[-1]]))
    levels, first = np.unique(levels, return_index=True)
    return InverseCdfTable(levels=levels, knots=knots[first])


def sample(d, seed: Seed, n: int) -> np.ndarray:
    """
    Draws n i.i.d. values from d, deterministic given the seed.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    return d.draw(seed.generator(), int(n))
