#!/usr/bin/env python3
"""
Test suite for the inefficiency metrics and their analytic bounds
"""

import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.analyzers.inefficiency import analyze, bounds, bounds_precondition, measure, welfare_floor
from src.models.errors import DegenerateMetricError
from src.models.game_core import GameConfig, StrategyProfile, incentive_at, xbar
from src.models.return_models import RationalModel
from src.solvers.equilibrium import homogeneous_pne
from src.solvers.welfare import homogeneous_optimum, welfare_at

DEFAULT_TEAM = [(0.82, 2.31), (1.27, 1.64), (0.95, 2.08), (1.10, 1.92), (0.71, 2.45), (1.15, 1.70)]


def random_homogeneous_teams(count, seed, sizes=(2, 3, 4, 5, 6), r_s=1.0):
    """Teams with a common h whose members have some incentive to review."""
    rng = np.random.default_rng(seed)
    teams = []
    while len(teams) < count:
        n = int(rng.choice(sizes))
        mu_s = float(rng.uniform(0.5, 1.5))
        mu_r = mu_s * float(rng.uniform(1.2, 2.5))
        config = GameConfig.homogeneous(n, mu_s, mu_r, r_s=r_s)
        if incentive_at(config, xbar(config), 0) > 0.0:
            teams.append(config)
    return teams


class TestBounds(unittest.TestCase):
    """Closed-form bounds and their precondition."""

    def test_exponential_bounds(self):
        config = GameConfig.create(DEFAULT_TEAM)
        limits = bounds(config)
        a_1, a_n = config.a[0], config.a[-1]
        self.assertAlmostEqual(limits['poa_bound'], 2 * a_n, delta=1e-12)
        self.assertAlmostEqual(limits['tri_bound'], 2 * a_n / a_1, delta=1e-12)
        self.assertAlmostEqual(limits['li_bound'], 2.0, delta=1e-12)

    def test_rational_bounds_follow_xbar(self):
        config = GameConfig.create(DEFAULT_TEAM, return_model=RationalModel())
        limits = bounds(config)
        mu = config.mu_t_s
        self.assertAlmostEqual(limits['li_bound'], mu / (mu - limits['xbar']), delta=1e-12)
        self.assertAlmostEqual(limits['poa_bound'], limits['li_bound'] * config.a[-1], delta=1e-12)

    def test_precondition(self):
        self.assertTrue(bounds_precondition(GameConfig.create(DEFAULT_TEAM)))
        self.assertTrue(bounds_precondition(GameConfig.homogeneous(6, 1.0, 2.0)))
        self.assertFalse(bounds_precondition(GameConfig.create([(0.01, 2.0), (1.9, 2.0), (1.9, 2.0)])))

    def test_welfare_floor_closed_form(self):
        config = GameConfig.homogeneous(6, 1.0, 2.0)
        expected = 6.0 + 3.0 / 1.5 * incentive_at(config, 3.0, 0)
        self.assertAlmostEqual(welfare_floor(config), expected, delta=1e-10)


class TestMeasure(unittest.TestCase):
    """Metrics from a solved equilibrium and optimum."""

    @classmethod
    def setUpClass(cls):
        cls.team = GameConfig.create(DEFAULT_TEAM)
        cls.equilibrium, cls.optimum, cls.report = analyze(cls.team)

    def test_default_team_strictly_within_bounds(self):
        report = self.report
        self.assertTrue(report.precondition)
        self.assertTrue(report.within_bounds, report.to_dict())
        self.assertGreaterEqual(report.poa, 1.0 - 1e-9)
        self.assertTrue(report.floor_ok)

    def test_ratios_match_definitions(self):
        report = self.report
        mu = self.team.mu_t_s
        self.assertAlmostEqual(report.li, (mu - report.x_pne) / (mu - report.x_sw), delta=1e-12)
        self.assertAlmostEqual(report.tri, self.optimum.profile.total() / self.equilibrium.profile.total(),
                               delta=1e-12)
        self.assertAlmostEqual(report.poa, report.psi_sw / report.psi_pne, delta=1e-12)

    def test_serialized_report(self):
        document = self.report.to_dict()
        self.assertIn('within_bounds', document)
        self.assertIn('floor_ok', document)
        self.assertEqual(document['poa'], self.report.poa)

    def test_degenerate_inputs(self):
        zeros = StrategyProfile.zeros(self.team.n)
        with self.assertRaises(DegenerateMetricError):
            measure(self.team, zeros, self.optimum.profile)
        with self.assertRaises(DegenerateMetricError):
            measure(self.team, self.equilibrium.profile, zeros)


class TestHomogeneousTeams(unittest.TestCase):
    """Teams sharing one h."""

    def test_single_player_has_no_inefficiency(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            mu_s = float(rng.uniform(0.5, 1.5))
            config = GameConfig.homogeneous(1, mu_s, mu_s * float(rng.uniform(1.2, 2.5)), r_s=0.1)
            if incentive_at(config, xbar(config), 0) <= 0.0:
                continue
            _, _, report = analyze(config)
            self.assertAlmostEqual(report.poa, 1.0, delta=1e-6)

    def test_poa_matches_closed_forms(self):
        for config in random_homogeneous_teams(50, seed=2019):
            _, _, report = analyze(config)
            per_player, x_pne = homogeneous_pne(config)
            total_sw, x_sw = homogeneous_optimum(config)
            closed = welfare_at(config, total_sw, x_sw) / welfare_at(config, config.n * per_player, x_pne)
            self.assertAlmostEqual(report.poa, closed, delta=1e-6 * closed, msg=config.to_dict())
            self.assertGreater(report.poa, 1.0)
            self.assertTrue(report.within_bounds, report.to_dict())

    def test_equilibrium_sits_left_of_optimum(self):
        for config in random_homogeneous_teams(10, seed=7):
            _, x_pne = homogeneous_pne(config)
            _, x_sw = homogeneous_optimum(config)
            self.assertLess(x_pne, x_sw)
            self.assertLess(x_sw, xbar(config))


def run_tests():
    """Run all tests."""
    print("🧪 Running inefficiency tests")
    print("=" * 50)

    loader = unittest.TestLoader()
    suite = loader.loadTestsFromModule(sys.modules[__name__])
    result = unittest.TextTestRunner(verbosity=2).run(suite)

    success = result.wasSuccessful()
    print(f"\n{'✅ All tests passed!' if success else '❌ Some tests failed!'}")
    return success


if __name__ == "__main__":
    sys.exit(0 if run_tests() else 1)
