import logging
from typing import Any, Dict

from robust_qcd.distributions import Distribution1D, Exponential, Gaussian, HuberCensored0, HuberCensored1
from robust_qcd.uncertainty import (
    CensoredLogRatio,
    DensityLogRatio,
    EpsContamination,
    ExpRateRay,
    GaussianLogRatio,
    GaussianMeanBand,
    LfdPair,
    Singleton,
    UncertaintyClass,
    UnsupportedClassPair,
)
from robust_qcd.uncertainty.huber import degeneracy_limit, huber_residuals, huber_thresholds

LOGGER = logging.getLogger(__name__)


def _pair(nu0: Distribution1D, nu1: Distribution1D) -> LfdPair:
    if isinstance(nu0, Gaussian) and isinstance(nu1, Gaussian) and nu0.sd == nu1.sd:
        llr = GaussianLogRatio(mean0=nu0.mean, mean1=nu1.mean, sd=nu0.sd)
    else:
        llr = DensityLogRatio(nu0=nu0, nu1=nu1)
    return LfdPair(nu0_bar=nu0, nu1_under=nu1, llr=llr)


def _nearest_mean(band: GaussianMeanBand, reference: float) -> float:
    if band.lo > reference:
        return band.lo
    if band.hi < reference:
        return band.hi
    raise UnsupportedClassPair(f"mean {reference} lies inside the band [{band.lo}, {band.hi}]")


def _solve_singleton_band(p0: Singleton, p1: GaussianMeanBand) -> LfdPair:
    if not isinstance(p0.d, Gaussian) or p0.d.sd != p1.sd:
        raise UnsupportedClassPair("a Gaussian mean band needs a Gaussian pre-change law with the same sd")
    return _pair(p0.d, Gaussian(mean=_nearest_mean(p1, p0.d.mean), sd=p1.sd))


def _solve_singleton_ray(p0: Singleton, p1: ExpRateRay) -> LfdPair:
    if not isinstance(p0.d, Exponential):
        raise UnsupportedClassPair("an exponential rate ray needs an exponential pre-change law")
    if not p1.theta_min > p0.d.theta:
        raise UnsupportedClassPair(f"rate ray theta >= {p1.theta_min} contains the pre-change rate {p0.d.theta}")
    return _pair(p0.d, Exponential(theta=p1.theta_min))


def _solve_bands(p0: GaussianMeanBand, p1: GaussianMeanBand) -> LfdPair:
    if p0.sd != p1.sd:
        raise UnsupportedClassPair("Gaussian mean bands need a common sd")
    if p0.hi < p1.lo:
        return _pair(Gaussian(p0.hi, p0.sd), Gaussian(p1.lo, p1.sd))
    if p1.hi < p0.lo:
        return _pair(Gaussian(p0.lo, p0.sd), Gaussian(p1.hi, p1.sd))
    raise UnsupportedClassPair(f"bands [{p0.lo}, {p0.hi}] and [{p1.lo}, {p1.hi}] overlap")


def _solve_contamination(p0: EpsContamination, p1: EpsContamination) -> LfdPair:
    if p0.eps != p1.eps:
        raise UnsupportedClassPair(f"contamination levels differ ({p0.eps} vs {p1.eps})")
    a, b = huber_thresholds(p0.nominal, p1.nominal, p0.eps)
    nu0 = HuberCensored0(p0=p0.nominal, p1=p1.nominal, eps=p0.eps, b=b).with_sampling_table()
    nu1 = HuberCensored1(p0=p0.nominal, p1=p1.nominal, eps=p0.eps, a=a).with_sampling_table()
    return LfdPair(nu0_bar=nu0, nu1_under=nu1, llr=CensoredLogRatio(p0=p0.nominal, p1=p1.nominal, a=a, b=b))


def solve_lfd(P0: UncertaintyClass, P1: UncertaintyClass) -> LfdPair:
    """
    Constructs the least favorable pair (nu0_bar, nu1_under) of two uncertainty classes.

    :param P0: pre-change class
    :param P1: post-change class
    :return: the pair and its log-likelihood ratio
    :raises UnsupportedClassPair: for class combinations without a known construction
    """
    if isinstance(P0, Singleton) and isinstance(P1, Singleton):
        result = _pair(P0.d, P1.d)
    elif isinstance(P0, Singleton) and isinstance(P1, GaussianMeanBand):
        result = _solve_singleton_band(P0, P1)
    elif isinstance(P0, Singleton) and isinstance(P1, ExpRateRay):
        result = _solve_singleton_ray(P0, P1)
    elif isinstance(P0, GaussianMeanBand) and isinstance(P1, GaussianMeanBand):
        result = _solve_bands(P0, P1)
    elif isinstance(P0, EpsContamination) and isinstance(P1, EpsContamination):
        result = _solve_contamination(P0, P1)
    else:
        raise UnsupportedClassPair(f"no least favorable construction for ({type(P0).__name__}, {type(P1).__name__})")
    LOGGER.debug(f"least favorable pair: {result.describe()}")
    return result


def describe_lfd(P0: UncertaintyClass, P1: UncertaintyClass, lfd: LfdPair) -> Dict[str, Any]:
    """
    Report of a solved pair. For eps-contamination classes it carries the censoring thresholds,
    the residuals of their defining equations and the largest admissible eps.
    """
    report: Dict[str, Any] = {"p0": P0.describe(), "p1": P1.describe(), **lfd.describe()}
    if isinstance(lfd.llr, CensoredLogRatio):
        a, b = lfd.llr.a, lfd.llr.b
        residual_a, residual_b = huber_residuals(lfd.llr.p0, lfd.llr.p1, P0.eps, a, b)
        report.update({
            "a": a,
            "b": b,
            "residuals": {"a": residual_a, "b": residual_b},
            "degeneracy_limit": degeneracy_limit(lfd.llr.p0, lfd.llr.p1),
        })
    return report
