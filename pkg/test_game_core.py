#!/usr/bin/env python3
"""
Test suite for the game core: types, incentive kernels and assumption checks
"""

import math
import os
import sys
import unittest
from fractions import Fraction

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.experiments.team_sampler import SweepSpec, sample_team
from src.models.errors import ConfigError, DerivativeUndefinedError, DomainError, StructuralError
from src.models.game_core import (GameConfig, PlayerParams, StrategyProfile, a3_holds,
                                  expected_utility, incentive, incentive_at, incentive_dx,
                                  slackness, upper_admissible_rate, validate_assumptions, xbar)
from src.models.return_models import ExponentialModel, RationalModel, build_return_model

DEFAULT_TEAM = [(0.82, 2.31), (1.27, 1.64), (0.95, 2.08), (1.10, 1.92), (0.71, 2.45), (1.15, 1.70)]


class TestPlayersAndConfig(unittest.TestCase):
    """Construction, ordering and validation of game instances."""

    def test_player_derived_quantities(self):
        player = PlayerParams(mu_s=1.0, mu_r=4.0)
        self.assertEqual(player.h, 0.25)
        self.assertEqual(player.a, 1.25)

    def test_player_rejects_non_positive_rates(self):
        for mu_s, mu_r in [(0.0, 1.0), (1.0, -2.0), (math.inf, 1.0), (math.nan, 1.0)]:
            with self.assertRaises(StructuralError):
                PlayerParams(mu_s=mu_s, mu_r=mu_r)

    def test_players_sorted_by_h_with_permutation(self):
        config = GameConfig.create([(1.0, 1.0), (1.0, 4.0), (1.0, 2.0)])
        self.assertEqual(config.order, (1, 2, 0))
        self.assertEqual(config.h, (0.25, 0.5, 1.0))
        self.assertEqual(config.to_input_order([10.0, 20.0, 30.0]), [30.0, 10.0, 20.0])
        self.assertEqual(config.from_input_order([30.0, 10.0, 20.0]), [10.0, 20.0, 30.0])

    def test_ties_keep_input_order(self):
        config = GameConfig.create([(2.0, 4.0), (1.0, 2.0), (0.5, 1.0)])
        self.assertEqual(config.order, (0, 1, 2))
        self.assertEqual(config.mu_s, (2.0, 1.0, 0.5))

    def test_model_endpoint_bound_to_total_service(self):
        config = GameConfig.create(DEFAULT_TEAM)
        self.assertAlmostEqual(config.mu_t_s, 6.0, places=12)
        self.assertEqual(config.return_model.endpoint, config.mu_t_s)
        self.assertEqual(config.return_model.r(config.mu_t_s), 0.0)

    def test_unbound_model_has_no_endpoint(self):
        with self.assertRaises(StructuralError):
            ExponentialModel().endpoint

    def test_empty_team_rejected(self):
        with self.assertRaises(StructuralError):
            GameConfig.create([])

    def test_digest_is_stable_and_sensitive(self):
        a = GameConfig.create(DEFAULT_TEAM)
        b = GameConfig.create(DEFAULT_TEAM)
        c = GameConfig.create(DEFAULT_TEAM, r_s=2.0)
        self.assertEqual(a.digest(), b.digest())
        self.assertNotEqual(a.digest(), c.digest())

    def test_unknown_model_family(self):
        with self.assertRaises(ConfigError):
            build_return_model('logistic', A=1.0)


class TestSlacknessAndIncentive(unittest.TestCase):
    """Slackness, incentive and utility kernels."""

    def setUp(self):
        self.pair = GameConfig.create([(1.0, 1.0), (1.0, 1.0)])
        self.team = GameConfig.create(DEFAULT_TEAM)

    def test_slackness_with_zero_review(self):
        self.assertEqual(slackness(self.pair, StrategyProfile.zeros(2)), 2.0)

    def test_slackness_binding_constraint(self):
        self.assertEqual(slackness(self.pair, StrategyProfile.of([0.5, 0.5])), 0.0)

    def test_slackness_equals_service_minus_review(self):
        profile = StrategyProfile.of([0.3, 0.2, 0.1, 0.4, 0.5, 0.0])
        lambda_s = profile.lambda_s(self.team)
        self.assertAlmostEqual(slackness(self.team, profile), sum(lambda_s) - profile.total(), places=12)

    def test_slackness_matches_exact_summation(self):
        config = sample_team(SweepSpec(), 0.3, 0)
        rng = np.random.default_rng(11)
        for _ in range(20):
            lam = rng.uniform(0.0, np.asarray(config.mu_r)) * 0.3
            profile = StrategyProfile.of(lam)
            exact = sum(Fraction(m) for m in config.mu_s) - sum(
                Fraction(a) * Fraction(v) for a, v in zip(config.a, profile.lambda_r))
            self.assertAlmostEqual(slackness(config, profile), float(exact), delta=1e-12)

    def test_slackness_dimension_mismatch(self):
        with self.assertRaises(StructuralError):
            slackness(self.pair, StrategyProfile.zeros(3))

    def test_incentive_at_full_slack_is_service_penalty(self):
        zero = StrategyProfile.zeros(self.team.n)
        for i in range(self.team.n):
            self.assertEqual(incentive(self.team, zero, i), -self.team.h[i] * self.team.r_s)

    def test_incentive_on_plateau(self):
        full = StrategyProfile.of(self.pair.mu_r)  # x = 2 - 4 < 0
        self.assertLess(slackness(self.pair, full), 0.0)
        for i in range(2):
            self.assertEqual(incentive(self.pair, full, i), -self.pair.h[i] * self.pair.r_s)
        self.assertEqual(incentive_at(self.pair, 0.0, 0), -1.0)

    def test_incentive_hand_value(self):
        config = GameConfig.homogeneous(6, 1.0, 2.0)  # mu_T^S = 6, h = 0.5
        expected = 5.0 * (1 - math.exp(-1.5)) ** 2 - 0.5
        self.assertAlmostEqual(incentive_at(config, 3.0, 0), expected, places=12)
        self.assertAlmostEqual(incentive_at(config, 3.0, 0), 2.5176, places=4)

    def test_incentive_index_out_of_range(self):
        with self.assertRaises(StructuralError):
            incentive(self.pair, StrategyProfile.zeros(2), 2)

    def test_incentive_offsets_independent_of_x(self):
        for x in np.linspace(-1.0, self.team.mu_t_s, 25):
            for i in range(self.team.n):
                for j in range(self.team.n):
                    gap = incentive_at(self.team, float(x), i) - incentive_at(self.team, float(x), j)
                    self.assertAlmostEqual(gap, (self.team.h[j] - self.team.h[i]) * self.team.r_s, places=12)

    def test_utility_without_review_is_service_income(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            lam = rng.uniform(0.0, np.asarray(self.team.mu_r))
            lam[2] = 0.0
            profile = StrategyProfile.of(lam)
            self.assertEqual(expected_utility(self.team, profile, 2), self.team.mu_s[2] * self.team.r_s)

    def test_utility_in_penalty_region(self):
        profile = StrategyProfile.of(self.pair.mu_r)
        u = expected_utility(self.pair, profile, 0)
        self.assertAlmostEqual(u, 1.0 - 1.0 * 1.0 * 1.0, places=12)
        self.assertLess(u, self.pair.mu_s[0] * self.pair.r_s)

    def test_utility_matches_bernoulli_expectation(self):
        config = self.team
        profile = StrategyProfile.of([0.4, 0.3, 0.3, 0.2, 0.2, 0.1])
        x = slackness(config, profile)
        i = 1
        lam = profile[i]
        model = config.return_model
        constrained = np.random.default_rng(2019).random(10 ** 6) < model.p(x)
        service = (config.mu_s[i] - config.h[i] * lam) * config.r_s
        review = np.where(constrained, 0.0, lam * model.r(x))
        estimate = service + review.mean()
        sigma = lam * model.r(x) * math.sqrt(model.p(x) * (1 - model.p(x)) / 10 ** 6)
        self.assertLess(abs(expected_utility(config, profile, i) - estimate), 4 * sigma)

    def test_upper_admissible_rate(self):
        profile = StrategyProfile.of([0.0, 0.8])  # others load 1.6 of the 2.0 capacity
        self.assertAlmostEqual(upper_admissible_rate(self.pair, profile, 0), 0.2, places=12)
        crowded = StrategyProfile.of([0.0, 1.0])
        self.assertEqual(upper_admissible_rate(self.pair, crowded, 0), 0.0)
        self.assertEqual(upper_admissible_rate(self.pair, StrategyProfile.zeros(2), 0), 1.0)


class TestDerivatives(unittest.TestCase):
    """Analytic derivatives of the incentive."""

    @classmethod
    def setUpClass(cls):
        cls.team = GameConfig.create(DEFAULT_TEAM)
        cls.rational = GameConfig.create(DEFAULT_TEAM, return_model=RationalModel())
        cls.rng = np.random.default_rng(8)

    def test_strictly_concave(self):
        for x in self.rng.uniform(0.0, self.team.mu_t_s, 100):
            if x <= 0.0:
                continue
            _, curvature = incentive_dx(self.team, float(x), 0)
            self.assertLess(curvature, 0.0)

    def test_slope_vanishes_at_half_capacity(self):
        slope, _ = incentive_dx(self.team, self.team.mu_t_s / 2, 3)
        self.assertLess(abs(slope), 1e-10)

    def test_derivatives_match_finite_differences(self):
        step = 1e-6
        for config in (self.team, self.rational):
            mu = config.mu_t_s
            for x in self.rng.uniform(0.01 * mu, 0.99 * mu, 1000):
                x = float(x)
                slope, curvature = incentive_dx(config, x, 2)
                fd_slope = (incentive_at(config, x + step, 2) - incentive_at(config, x - step, 2)) / (2 * step)
                self.assertLess(abs(slope - fd_slope), 1e-6 * (1 + abs(slope)))
                fd_curv = (incentive_dx(config, x + step, 2)[0] - incentive_dx(config, x - step, 2)[0]) / (2 * step)
                self.assertLess(abs(curvature - fd_curv), 1e-6 * (1 + abs(curvature)))

    def test_derivative_undefined_on_plateau(self):
        with self.assertRaises(DerivativeUndefinedError):
            incentive_dx(self.team, 0.0, 0)
        with self.assertRaises(DerivativeUndefinedError):
            incentive_dx(self.team, StrategyProfile.of(self.team.mu_r), 0)

    def test_derivative_from_profile(self):
        profile = StrategyProfile.of([0.2] * 6)
        self.assertEqual(incentive_dx(self.team, profile, 1),
                         incentive_dx(self.team, slackness(self.team, profile), 1))


class TestXbar(unittest.TestCase):
    """The incentive maximiser."""

    def test_exponential_peak_at_half_capacity(self):
        for A, B in [(5.0, 0.5), (1.0, 2.0), (10.0, 0.1), (3.0, 1.3)]:
            config = GameConfig.create(DEFAULT_TEAM, return_model=ExponentialModel(A=A, B=B))
            self.assertAlmostEqual(xbar(config), config.mu_t_s / 2, delta=1e-10)

    def test_bracket_signs(self):
        config = GameConfig.create(DEFAULT_TEAM)
        eps = 1e-9 * config.mu_t_s
        self.assertGreater(incentive_dx(config, eps, 0)[0], 0.0)
        self.assertLess(incentive_dx(config, config.mu_t_s - eps, 0)[0], 0.0)

    def test_dense_grid_argmax(self):
        for family in (ExponentialModel(), RationalModel()):
            config = GameConfig.create(DEFAULT_TEAM, return_model=family)
            grid = np.linspace(0.0, config.mu_t_s, 10 ** 6 + 1)
            model = config.return_model
            values = model.r_array(grid) * (1.0 - model.p_array(grid))
            spacing = grid[1] - grid[0]
            self.assertLessEqual(abs(grid[int(np.argmax(values))] - xbar(config)), 2 * spacing)

    def test_rational_peak_is_stationary(self):
        config = GameConfig.create(DEFAULT_TEAM, return_model=RationalModel(A=4.0, B=1.5, C=0.5))
        peak = xbar(config)
        self.assertTrue(0.0 < peak < config.mu_t_s)
        self.assertLess(abs(incentive_dx(config, peak, 0)[0]), 1e-9)


class TestValidation(unittest.TestCase):
    """Assumption reports."""

    def test_default_experiment_team_passes(self):
        for config in (GameConfig.homogeneous(6, 1.0, 2.0), GameConfig.create(DEFAULT_TEAM)):
            report = validate_assumptions(config)
            self.assertTrue(report.passed, report.to_dict())
            self.assertTrue(a3_holds(config))

    def test_rational_model_satisfies_shape_assumptions(self):
        report = validate_assumptions(GameConfig.create(DEFAULT_TEAM, return_model=RationalModel()))
        self.assertFalse(report.violated('A1'))
        self.assertFalse(report.violated('A2'))

    def test_increasing_return_flags_a1(self):
        config = GameConfig.create(DEFAULT_TEAM, return_model=ExponentialModel(A=5.0, B=-0.5))
        report = validate_assumptions(config)
        self.assertFalse(report.passed)
        self.assertTrue(report.violated('A1'))
        self.assertIsNotNone(next(v for v in report.violations if v.assumption == 'A1').x)

    def test_huge_review_capacity_flags_a3(self):
        config = GameConfig.create([(1.0, 100.0), (1.0, 2.0), (1.0, 2.0)])
        report = validate_assumptions(config)
        self.assertTrue(report.violated('A3'))
        players = [v.player for v in report.violations if v.assumption == 'A3']
        self.assertIn(0, players)  # smallest h sorts first
        self.assertFalse(a3_holds(config))

    def test_design_notes_do_not_fail(self):
        config = GameConfig.create([(2.0, 1.5), (2.0, 1.5), (2.0, 1.5), (2.0, 1.5)], r_s=0.1)
        report = validate_assumptions(config)
        self.assertTrue(any(n.assumption == 'A3-design' for n in report.notes))
        self.assertFalse(report.violated('A3-design'))

    def test_grid_too_small(self):
        with self.assertRaises(DomainError):
            validate_assumptions(GameConfig.create(DEFAULT_TEAM), grid_size=5)


def run_tests():
    """Run all tests."""
    print("🧪 Running game core tests")
    print("=" * 50)

    loader = unittest.TestLoader()
    suite = loader.loadTestsFromModule(sys.modules[__name__])
    result = unittest.TextTestRunner(verbosity=2).run(suite)

    success = result.wasSuccessful()
    print(f"\n{'✅ All tests passed!' if success else '❌ Some tests failed!'}")
    return success


if __name__ == "__main__":
    sys.exit(0 if run_tests() else 1)
