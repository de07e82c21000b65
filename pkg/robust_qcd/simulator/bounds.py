import math

from robust_qcd.distributions import Distribution1D
from robust_qcd.distributions.divergence import kl_divergence
from robust_qcd.simulator import AsymptoticBound, NonInformative
from robust_qcd.uncertainty import LfdPair


def asymptotic_bound(nu0: Distribution1D, nu1: Distribution1D, lfd: LfdPair, alpha: float) -> AsymptoticBound:
    """
    Large-threshold delay of the robust CUSUM under the true pair (nu0, nu1) and its cost relative
    to the CUSUM designed for the true pair.

    :param nu0: true pre-change law
    :param nu1: true post-change law
    :param lfd: least favorable pair the robust test is designed for
    :param alpha: false alarm level
    :raises NonInformative: if the robust statistic has no positive drift under nu1
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    information = kl_divergence(nu1, lfd.nu0_bar) - kl_divergence(nu1, lfd.nu1_under)
    if not information > 0:
        raise NonInformative(f"robust statistic has drift {information:.6g} <= 0 under {nu1.describe()}")
    divergence = kl_divergence(nu1, nu0)
    log_alpha = abs(math.log(alpha))
    return AsymptoticBound(
        delay_bound=log_alpha / information,
        factor=divergence / information,
        optimal_delay_bound=log_alpha / divergence if divergence > 0 else math.inf,
        information=information,
    )
