import math

import numpy as np
from scipy import stats

from robust_qcd.distributions import Gaussian
from robust_qcd.uncertainty import DegenerateClasses, NonMonotoneLR
from robust_qcd.uncertainty.huber import check_monotone_ratio, degeneracy_limit, huber_residuals, huber_thresholds
from tests import TestBase

P0, P1 = Gaussian(0.0, 1.0), Gaussian(1.0, 1.0)


def _grid_root(func, lo: float, hi: float, n: int = 200_001) -> float:
    """
    Root of a monotone function by tabulating it densely and interpolating between the bracketing knots.
    """
    t = np.linspace(lo, hi, n)
    values = func(t)
    i = int(np.nonzero(np.sign(values[:-1]) != np.sign(values[1:]))[0][0])
    return float(t[i] - values[i] * (t[i + 1] - t[i]) / (values[i + 1] - values[i]))


def _gaussian_oracle(eps: float):
    """
    log a and log b for N(0,1) vs N(1,1), where log L(x) = x - 1/2.
    """
    norm = stats.norm

    def b_equation(t):
        return (1.0 - eps) * (norm.cdf(t + 0.5) + norm.sf(t - 0.5) * np.exp(-t)) - 1.0

    def a_equation(s):
        return (1.0 - eps) * (norm.sf(s - 0.5) + np.exp(s) * norm.cdf(s + 0.5)) - 1.0

    return _grid_root(a_equation, -6.0, 0.0), _grid_root(b_equation, 0.0, 6.0)


class HuberThresholdsTest(TestBase):

    def test_zero_contamination_is_uncensored(self):
        self.assertEqual(huber_thresholds(P0, P1, 0.0), (0.0, math.inf))

    def test_residuals_are_tiny(self):
        for eps in (0.005, 0.05, 0.1):
            a, b = huber_thresholds(P0, P1, eps)
            residual_a, residual_b = huber_residuals(P0, P1, eps, a, b)
            with self.subTest(eps=eps):
                self.assertLess(residual_a, 1e-8)
                self.assertLess(residual_b, 1e-8)

    def test_agrees_with_dense_grid_oracle(self):
        for eps in (0.005, 0.05):
            a, b = huber_thresholds(P0, P1, eps)
            log_a, log_b = _gaussian_oracle(eps)
            with self.subTest(eps=eps):
                self.assertAlmostEqual(math.log(a), log_a, delta=1e-6)
                self.assertAlmostEqual(math.log(b), log_b, delta=1e-6)

    def test_symmetric_pair_has_reciprocal_thresholds(self):
        a, b = huber_thresholds(P0, P1, 0.05)
        self.assertAlmostEqual(a * b, 1.0, delta=1e-9)
        self.assertLess(a, 1.0)
        self.assertGreater(b, 1.0)

    def test_thresholds_tighten_with_eps(self):
        a_small, b_small = huber_thresholds(P0, P1, 0.005)
        a_large, b_large = huber_thresholds(P0, P1, 0.05)
        self.assertLess(a_small, a_large)
        self.assertGreater(b_small, b_large)

    def test_decreasing_ratio(self):
        a, b = huber_thresholds(P1, P0, 0.05)
        residual_a, residual_b = huber_residuals(P1, P0, 0.05, a, b)
        self.assertLess(max(residual_a, residual_b), 1e-8)
        self.assertAlmostEqual(a * b, 1.0, delta=1e-9)

    def test_overlapping_classes_are_degenerate(self):
        with self.assertRaises(DegenerateClasses) as context:
            huber_thresholds(P0, P1, 0.5)
        self.assertIn("eps must stay below", str(context.exception))

    def test_eps_outside_unit_interval_is_rejected(self):
        with self.assertRaises(ValueError):
            huber_thresholds(P0, P1, 1.0)


class DegeneracyLimitTest(TestBase):

    def test_limit_of_gaussian_pair(self):
        # a = b = 1 once (1 - eps) (P0(L <= 1) + P1(L > 1)) = 1
        expected = 1.0 - 1.0 / (2.0 * stats.norm.cdf(0.5))
        self.assertAlmostEqual(degeneracy_limit(P0, P1), expected, delta=1e-5)

    def test_thresholds_exist_just_below_the_limit(self):
        limit = degeneracy_limit(P0, P1)
        a, b = huber_thresholds(P0, P1, limit - 1e-3)
        self.assertLess(a, b)


class MonotoneRatioTest(TestBase):

    def test_increasing(self):
        self.assertTrue(check_monotone_ratio(P0, P1))

    def test_decreasing(self):
        self.assertFalse(check_monotone_ratio(P1, P0))

    def test_scale_change_is_not_monotone(self):
        with self.assertRaises(NonMonotoneLR):
            check_monotone_ratio(Gaussian(0.0, 1.0), Gaussian(0.0, 2.0))

    def test_identical_laws_are_degenerate(self):
        with self.assertRaises(DegenerateClasses):
            check_monotone_ratio(P0, Gaussian(0.0, 1.0))
