import math

import numpy as np

from robust_qcd.detectors import (
    CusumSpec,
    CusumState,
    GlrSpec,
    InvalidDetector,
    ShiryaevSpec,
    SrSpec,
    parse_detector,
)
from robust_qcd.detectors.steps import (
    StoppingRule,
    cusum_step,
    glr_statistic,
    run_to_alarm,
    shiryaev_step,
    sr_step,
)
from robust_qcd.distributions import Exponential, Gaussian
from tests import TestBase


def _feed(rule: StoppingRule, values: np.ndarray, size: int = None, rng=None):
    """
    Feeds the columns of values through the rule, collecting the statistic after every step.
    """
    state = rule.initial_state(size, rng)
    statistics = []
    for value in values:
        state, _ = rule.step(state, value)
        statistics.append(np.copy(state.statistic))
    return state, statistics


def _glr_oracle(x: np.ndarray, theta_lo: float, theta_hi: float, window: int) -> float:
    theta = np.arange(theta_lo, theta_hi + 5e-5, 1e-4)
    n = len(x)
    best = -math.inf
    for k in range(max(0, n - window), n):
        s, m = float(np.sum(x[k:])), n - k
        best = max(best, float(np.max(theta * s - theta ** 2 * m / 2.0)))
    return best


class CusumTest(TestBase):

    def test_single_step(self):
        state, alarm = cusum_step(CusumState(statistic=-1.0, eta=10.0), 0.5)
        self.assertEqual(state.statistic, 0.5)
        self.assertEqual(state.n, 1)
        self.assertFalse(alarm)

    def test_recursion_is_the_maximum_over_change_points(self):
        rng = np.random.default_rng(3)
        llr = rng.normal(-0.3, 1.0, size=(15, 1000))
        _, statistics = _feed(StoppingRule(CusumSpec()), llr, size=1000)
        cumulative = np.vstack([np.zeros(1000), np.cumsum(llr, axis=0)])
        for n in range(1, 16):
            expected = cumulative[n] - np.min(cumulative[:n], axis=0)
            np.testing.assert_allclose(statistics[n - 1], expected, rtol=0.0, atol=1e-12)

    def test_alarm_at_threshold(self):
        _, alarm = cusum_step(CusumState(statistic=0.5, eta=1.0), 0.5)
        self.assertTrue(alarm)

    def test_larger_llr_never_lowers_the_statistic(self):
        rng = np.random.default_rng(23)
        llr = rng.normal(-0.2, 1.0, size=30)
        rule = StoppingRule(CusumSpec())
        _, base = _feed(rule, llr)
        for index in (0, 7, 29):
            raised = llr.copy()
            raised[index] += 0.8
            _, statistics = _feed(rule, raised)
            with self.subTest(index=index):
                self.assertTrue(all(float(s) >= float(b) for s, b in zip(statistics, base)))


class ShiryaevTest(TestBase):

    def test_statistic_is_the_prior_weighted_sum(self):
        rng = np.random.default_rng(7)
        llr = rng.normal(0.2, 1.0, size=20)
        for rho in (0.01, 0.1, 0.5):
            state = ShiryaevSpec(rho=rho).initial_state()
            for n in range(1, 21):
                state, _ = shiryaev_step(state, llr[n - 1])
                terms = [rho * (1.0 - rho) ** (k - 1) * math.exp(float(np.sum(llr[k - 1:n])))
                         for k in range(1, n + 1)]
                with self.subTest(rho=rho, n=n):
                    self.assertAlmostEqual(float(state.statistic), math.log(sum(terms)), delta=1e-9)

    def test_zero_llr_leaves_the_prior_mass(self):
        # sum of rho (1 - rho)^(k - 1) over k <= n
        state = ShiryaevSpec(rho=0.5).initial_state()
        for n in range(1, 30):
            state, _ = shiryaev_step(state, 0.0)
            with self.subTest(n=n):
                self.assertAlmostEqual(float(state.statistic), math.log1p(-0.5 ** n), places=12)

    def test_larger_llr_never_lowers_the_statistic(self):
        rng = np.random.default_rng(19)
        llr = rng.normal(0.0, 1.0, size=30)
        rule = StoppingRule(ShiryaevSpec(rho=0.05))
        _, base = _feed(rule, llr)
        for index in (0, 7, 29):
            raised = llr.copy()
            raised[index] += 0.8
            _, statistics = _feed(rule, raised)
            with self.subTest(index=index):
                self.assertTrue(all(float(s) >= float(b) - 1e-12 for s, b in zip(statistics, base)))

    def test_odds_drops_the_geometric_tail(self):
        rho = 0.2
        state = ShiryaevSpec(rho=rho, odds=True).initial_state()
        for value in (0.3, -0.1, 0.4):
            state, _ = shiryaev_step(state, value)
        self.assertAlmostEqual(float(state.statistic), float(state.log_t) - 3 * math.log1p(-rho) + math.log(rho))

    def test_rho_must_be_a_probability(self):
        for rho in (0.0, 1.0, 1.5):
            with self.subTest(rho=rho):
                with self.assertRaises(InvalidDetector):
                    ShiryaevSpec(rho=rho)


class ShiryaevRobertsTest(TestBase):

    def test_recursion_from_zero(self):
        lr = [2.0, 0.5, 3.0]
        state = SrSpec().initial_state()
        for value in lr:
            state, _ = sr_step(state, value)
        # sum over k of prod_{i >= k} lr_i
        self.assertAlmostEqual(state.r, 2.0 * 0.5 * 3.0 + 0.5 * 3.0 + 3.0)

    def test_recursion_from_a_start_value(self):
        state = SrSpec(r=4.0).initial_state()
        state, _ = sr_step(state, 0.5)
        self.assertAlmostEqual(state.r, 2.5)

    def test_negative_likelihood_ratio_is_rejected(self):
        with self.assertRaises(ValueError):
            sr_step(SrSpec().initial_state(), -1.0)

    def test_rule_maps_log_ratios_to_ratios(self):
        rule = StoppingRule(SrSpec(eta=100.0), llr=lambda x: x - 0.5)
        self.assertAlmostEqual(float(rule.transform(0.5)), 1.0)
        self.assertAlmostEqual(float(rule.transform(1.5)), math.e)

    def test_randomized_start(self):
        spec = SrSpec(psi=Exponential(1.0))
        with self.assertRaises(InvalidDetector):
            spec.initial_state()
        state = spec.initial_state(size=100, rng=np.random.default_rng(1))
        self.assertEqual(state.r.shape, (100,))
        self.assertTrue(np.all(state.r >= 0.0))

    def test_start_must_be_nonnegative(self):
        with self.assertRaises(InvalidDetector):
            SrSpec(r=-1.0)
        with self.assertRaises(InvalidDetector):
            SrSpec(psi=Gaussian())


class GlrTest(TestBase):

    def test_constant_stream(self):
        _, statistics = _feed(StoppingRule(GlrSpec(theta_lo=0.1, theta_hi=3.0)), np.full(4, 0.5))
        self.assertAlmostEqual(float(statistics[-1]), 0.5)

    def test_statistic_of_empty_window(self):
        self.assertEqual(glr_statistic(np.zeros(0), np.zeros(0), 0.1, 3.0), -math.inf)

    def test_matches_a_dense_theta_grid(self):
        rng = np.random.default_rng(11)
        x = rng.normal(0.4, 1.0, size=80)
        _, statistics = _feed(StoppingRule(GlrSpec(theta_lo=0.1, theta_hi=3.0, window=50)), x)
        for n in (1, 10, 49, 50, 51, 80):
            with self.subTest(n=n):
                self.assertAlmostEqual(float(statistics[n - 1]), _glr_oracle(x[:n], 0.1, 3.0, 50), delta=1e-6)

    def test_window_longer_than_the_stream(self):
        rng = np.random.default_rng(29)
        x = rng.normal(0.4, 1.0, size=80)
        _, statistics = _feed(StoppingRule(GlrSpec(theta_lo=0.1, theta_hi=3.0, window=100)), x)
        for n in (1, 40, 80):
            with self.subTest(n=n):
                self.assertAlmostEqual(float(statistics[n - 1]), _glr_oracle(x[:n], 0.1, 3.0, n), delta=1e-6)

    def test_vectorized_streams_agree_with_single_streams(self):
        rng = np.random.default_rng(13)
        x = rng.normal(0.0, 1.0, size=(30, 5))
        rule = StoppingRule(GlrSpec(window=10))
        _, batched = _feed(rule, x, size=5)
        for column in range(5):
            _, single = _feed(rule, x[:, column])
            self.assertAlmostEqual(float(batched[-1][column]), float(single[-1]), places=12)

    def test_bounds_are_validated(self):
        with self.assertRaises(InvalidDetector):
            GlrSpec(theta_lo=3.0, theta_hi=1.0)
        with self.assertRaises(InvalidDetector):
            GlrSpec(window=0)


class RunToAlarmTest(TestBase):

    def test_alarm_time(self):
        tau, censored, state = run_to_alarm(StoppingRule(CusumSpec(eta=1.0)), [0.5, 0.3, 0.4, 5.0], max_len=10)
        self.assertEqual(tau, 3)
        self.assertFalse(censored)
        self.assertAlmostEqual(state.statistic, 1.2)

    def test_constant_unit_llr(self):
        tau, censored, _ = run_to_alarm(StoppingRule(CusumSpec(eta=5.0)), [1.0] * 20, max_len=20)
        self.assertEqual((tau, censored), (5, False))

    def test_alarm_time_grows_with_the_threshold(self):
        stream = np.random.default_rng(31).normal(0.3, 1.0, size=400)
        families = {
            "cusum": (CusumSpec(), np.linspace(0.0, 10.0, 21)),
            "shiryaev": (ShiryaevSpec(rho=0.1), np.linspace(-5.0, 5.0, 21)),
            "sr": (SrSpec(), np.geomspace(1.0, 1e4, 21)),
            "glr": (GlrSpec(window=50), np.linspace(0.0, 10.0, 21)),
        }
        for family, (spec, etas) in families.items():
            rule = StoppingRule(spec)
            taus = [run_to_alarm(rule.with_eta(float(eta)), stream, max_len=400)[0] for eta in etas]
            with self.subTest(family=family):
                self.assertEqual(taus, sorted(taus))

    def test_censored_at_the_horizon(self):
        tau, censored, _ = run_to_alarm(StoppingRule(CusumSpec(eta=100.0)), iter(lambda: 0.1, None), max_len=25)
        self.assertEqual(tau, 25)
        self.assertTrue(censored)

    def test_exhausted_stream_is_censored(self):
        tau, censored, _ = run_to_alarm(StoppingRule(CusumSpec(eta=100.0)), [0.1, 0.2], max_len=25)
        self.assertEqual((tau, censored), (2, True))

    def test_uncalibrated_rule_never_alarms(self):
        tau, censored, _ = run_to_alarm(StoppingRule(CusumSpec()), [1e6] * 5, max_len=5)
        self.assertTrue(censored)

    def test_raw_observations_go_through_the_llr(self):
        rule = StoppingRule(CusumSpec(eta=1.0), llr=lambda x: x - 0.5)
        tau, censored, _ = run_to_alarm(rule, [1.0, 1.0, 1.0], max_len=10)
        self.assertEqual((tau, censored), (2, False))

    def test_horizon_must_be_positive(self):
        with self.assertRaises(ValueError):
            run_to_alarm(StoppingRule(CusumSpec()), [0.0], max_len=0)


class ParseDetectorTest(TestBase):

    def test_defaults(self):
        self.assertEqual(parse_detector({"type": "cusum"}), CusumSpec(eta=math.inf))
        self.assertEqual(parse_detector({"type": "Shiryaev", "eta": 2}), ShiryaevSpec(eta=2.0, rho=0.1))
        self.assertEqual(parse_detector({"type": "glr"}), GlrSpec())

    def test_sr_with_start_distribution(self):
        spec = parse_detector({"type": "sr", "eta": 50, "psi": {"type": "exponential", "theta": 1}})
        self.assertEqual(spec.psi, Exponential(1.0))
        self.assertEqual(spec.eta, 50.0)

    def test_describe_round_trip(self):
        for spec in (CusumSpec(eta=3.0), ShiryaevSpec(eta=1.5, rho=0.05, odds=True), SrSpec(eta=20.0, r=1.0),
                     GlrSpec(eta=4.0, theta_lo=0.2, theta_hi=2.0, window=100)):
            with self.subTest(spec=spec):
                self.assertEqual(parse_detector(spec.describe()), spec)

    def test_with_eta(self):
        rule = StoppingRule(CusumSpec())
        self.assertEqual(rule.with_eta(2.5).eta, 2.5)
        self.assertEqual(rule.eta, math.inf)
        self.assertEqual(rule.family, "cusum")

    def test_bad_blocks(self):
        for block in ({"eta": 1.0}, {"type": "page"}, {"type": "shiryaev", "rho": "often"},
                      {"type": "shiryaev", "rho": 2.0}, {"type": "glr", "window": 0}, "cusum"):
            with self.subTest(block=block):
                with self.assertRaises(InvalidDetector):
                    parse_detector(block)
