import math
from dataclasses import dataclass, replace
from typing import Any, ClassVar, Dict, Optional, Union

import numpy as np

from robust_qcd.distributions import ArrayOrFloat, Distribution1D, parse_distribution

GLR_DEFAULT_WINDOW = 2000


class InvalidDetector(ValueError):
    pass


def _filled(value: float, size: Optional[int]) -> ArrayOrFloat:
    return value if size is None else np.full(size, value, dtype=float)


@dataclass(frozen=True)
class CusumState:
    statistic: ArrayOrFloat = 0.0
    eta: float = math.inf
    n: int = 0

    def select(self, mask: np.ndarray) -> "CusumState":
        return replace(self, statistic=np.asarray(self.statistic)[mask])


@dataclass(frozen=True)
class ShiryaevState:
    """
    Keeps log R_n with R_n = T_n / (1 - rho)^n, where T_n is the prior-weighted likelihood sum
    sum_{k <= n} (1 - rho)^(k - 1) exp(llr_k + ... + llr_n). R_n obeys an O(1) recursion without
    underflowing, the reported statistic restores the (1 - rho)^n factor.
    """
    log_r: ArrayOrFloat = -math.inf
    rho: float = 0.1
    eta: float = math.inf
    n: int = 0
    # posterior odds instead of the prior-weighted sum
    odds: bool = False

    @property
    def log_t(self) -> ArrayOrFloat:
        return self.log_r + self.n * math.log1p(-self.rho)

    @property
    def statistic(self) -> ArrayOrFloat:
        if self.odds:
            return math.log(self.rho) + self.log_r
        return math.log(self.rho) + self.log_t

    def select(self, mask: np.ndarray) -> "ShiryaevState":
        return replace(self, log_r=np.asarray(self.log_r)[mask])


@dataclass(frozen=True)
class SrState:
    r: ArrayOrFloat = 0.0
    eta: float = math.inf
    n: int = 0

    @property
    def statistic(self) -> ArrayOrFloat:
        return self.r

    def select(self, mask: np.ndarray) -> "SrState":
        return replace(self, r=np.asarray(self.r)[mask])


@dataclass(frozen=True)
class GlrState:
    """
    Per start index k (oldest first): sums S_k = x_k + ... + x_n along the last axis of sums, counts m_k = n - k + 1.
    Counts are shared by all replications advancing in lock-step.
    """
    sums: np.ndarray
    counts: np.ndarray
    theta_lo: float
    theta_hi: float
    eta: float = math.inf
    window: int = GLR_DEFAULT_WINDOW
    n: int = 0
    statistic: ArrayOrFloat = -math.inf

    def select(self, mask: np.ndarray) -> "GlrState":
        return replace(self, sums=self.sums[mask], statistic=np.asarray(self.statistic)[mask])


DetectorState = Union[CusumState, ShiryaevState, SrState, GlrState]


@dataclass(frozen=True)
class CusumSpec:
    eta: float = math.inf

    family: ClassVar[str] = "cusum"
    log_scale: ClassVar[bool] = False

    def initial_state(self, size: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> CusumState:
        return CusumState(statistic=_filled(0.0, size), eta=self.eta)

    def with_eta(self, eta: float) -> "CusumSpec":
        return replace(self, eta=eta)

    def describe(self) -> Dict[str, Any]:
        return {"type": self.family, "eta": self.eta}


@dataclass(frozen=True)
class ShiryaevSpec:
    eta: float = math.inf
    rho: float = 0.1
    odds: bool = False

    family: ClassVar[str] = "shiryaev"
    log_scale: ClassVar[bool] = False

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise InvalidDetector(f"Shiryaev rho must lie in (0, 1), got {self.rho}")

    def initial_state(self, size: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> ShiryaevState:
        return ShiryaevState(log_r=_filled(-math.inf, size), rho=self.rho, eta=self.eta, odds=self.odds)

    def with_eta(self, eta: float) -> "ShiryaevSpec":
        return replace(self, eta=eta)

    def describe(self) -> Dict[str, Any]:
        return {"type": self.family, "eta": self.eta, "rho": self.rho, "odds": self.odds}


@dataclass(frozen=True)
class SrSpec:
    """
    Shiryaev-Roberts rule, started at a fixed r (SR-r) or at R_0 ~ psi when psi is given.
    """
    eta: float = math.inf
    r: float = 0.0
    psi: Optional[Distribution1D] = None

    family: ClassVar[str] = "sr"
    log_scale: ClassVar[bool] = True

    def __post_init__(self):
        if self.r < 0:
            raise InvalidDetector(f"SR start value r must be nonnegative, got {self.r}")
        if self.psi is not None and self.psi.support[0] < 0:
            raise InvalidDetector("SR start distribution psi must live on the nonnegative reals")

    def initial_state(self, size: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> SrState:
        if self.psi is None:
            return SrState(r=_filled(self.r, size), eta=self.eta)
        if rng is None:
            raise InvalidDetector("a randomized SR start needs a random generator")
        start = self.psi.draw(rng, 1 if size is None else size)
        return SrState(r=float(start[0]) if size is None else start, eta=self.eta)

    def with_eta(self, eta: float) -> "SrSpec":
        return replace(self, eta=eta)

    def describe(self) -> Dict[str, Any]:
        result = {"type": self.family, "eta": self.eta, "r": self.r}
        if self.psi is not None:
            result["psi"] = self.psi.describe()
        return result


@dataclass(frozen=True)
class GlrSpec:
    """
    Window-limited GLR-CUSUM for a N(0, 1) pre-change law and post-change means in [theta_lo, theta_hi].
    """
    eta: float = math.inf
    theta_lo: float = 0.1
    theta_hi: float = 3.0
    window: int = GLR_DEFAULT_WINDOW

    family: ClassVar[str] = "glr"
    log_scale: ClassVar[bool] = False

    def __post_init__(self):
        if not self.theta_lo < self.theta_hi:
            raise InvalidDetector(f"GLR needs theta_lo < theta_hi, got [{self.theta_lo}, {self.theta_hi}]")
        if self.window < 1:
            raise InvalidDetector(f"GLR window must be at least 1, got {self.window}")

    def initial_state(self, size: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> GlrState:
        shape = (0,) if size is None else (size, 0)
        return GlrState(sums=np.zeros(shape), counts=np.zeros(0), theta_lo=self.theta_lo, theta_hi=self.theta_hi,
                        eta=self.eta, window=self.window, statistic=_filled(-math.inf, size))

    def with_eta(self, eta: float) -> "GlrSpec":
        return replace(self, eta=eta)

    def describe(self) -> Dict[str, Any]:
        return {"type": self.family, "eta": self.eta, "theta_lo": self.theta_lo, "theta_hi": self.theta_hi,
                "window": self.window}


DetectorSpec = Union[CusumSpec, ShiryaevSpec, SrSpec, GlrSpec]


def parse_detector(block: Dict[str, Any]) -> DetectorSpec:
    """
    Builds a detector spec from its config block, e.g. {type: shiryaev, rho: 0.1}.
    A missing eta leaves the detector uncalibrated (it never alarms).
    """
    if not isinstance(block, dict) or "type" not in block:
        raise InvalidDetector(f"Detector block needs a 'type' key: {block}")
    kind = str(block["type"]).lower()
    try:
        eta = float(block.get("eta", math.inf))
        if kind == "cusum":
            return CusumSpec(eta=eta)
        if kind == "shiryaev":
            return ShiryaevSpec(eta=eta, rho=float(block.get("rho", 0.1)), odds=bool(block.get("odds", False)))
        if kind == "sr":
            psi = parse_distribution(block["psi"]) if "psi" in block else None
            return SrSpec(eta=eta, r=float(block.get("r", 0.0)), psi=psi)
        if kind == "glr":
            return GlrSpec(eta=eta, theta_lo=float(block.get("theta_lo", 0.1)),
                           theta_hi=float(block.get("theta_hi", 3.0)),
                           window=int(block.get("window", GLR_DEFAULT_WINDOW)))
    except InvalidDetector:
        raise
    except (TypeError, ValueError) as ex:
        raise InvalidDetector(f"Malformed '{kind}' detector block {block}: {ex}") from ex
    raise InvalidDetector(f"Unknown detector type '{kind}'")
