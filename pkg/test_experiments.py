#!/usr/bin/env python3
"""
Test suite for team sampling and the Monte Carlo heterogeneity sweep
"""

import math
import os
import sys
import tempfile
import unittest
from unittest.mock import patch

import numpy as np
import pandas as pd

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.config.settings import SolverSettings
from src.experiments.sweep import RECORD_COLUMNS, run_sweep, summarize, write_csvs
from src.experiments.team_sampler import SweepSpec, default_sweep_spec, draw_team, sample_team
from src.models.errors import ConfigError, DomainError, SamplingError


class TestTeamSampler(unittest.TestCase):
    """Rejection sampling of heterogeneous teams."""

    def setUp(self):
        self.spec = default_sweep_spec()

    def test_zero_heterogeneity_gives_the_means(self):
        for trial in range(5):
            config, attempts = draw_team(self.spec, 0.0, trial)
            self.assertEqual(attempts, 1)
            self.assertEqual(config.mu_s, (1.0,) * 6)
            self.assertEqual(config.mu_r, (2.0,) * 6)

    def test_accepted_teams_review_faster_than_they_serve(self):
        for trial in range(50):
            config = sample_team(self.spec, 0.5, trial)
            self.assertEqual(config.n, 6)
            self.assertTrue(all(0.0 < h <= 1.0 for h in config.h))
            self.assertTrue(all(m > 0.0 for m in config.mu_s))

    def test_streams_are_addressed_not_sequential(self):
        first = sample_team(self.spec, 0.25, 3)
        sample_team(self.spec, 0.25, 2)
        again = sample_team(self.spec, 0.25, 3)
        self.assertEqual(first.digest(), again.digest())
        self.assertNotEqual(first.digest(), sample_team(self.spec, 0.25, 4).digest())
        self.assertNotEqual(first.digest(), sample_team(self.spec, 0.3, 3).digest())

    def test_acceptance_rate_matches_independent_sampler(self):
        rho, trials = 0.5, 2000
        attempts = np.array([draw_team(self.spec, rho, t)[1] for t in range(trials)], dtype=float)

        rng = np.random.default_rng(99)
        size = 10 ** 5
        mu_s = 1.0 + rho * rng.standard_normal((size, 6))
        mu_r = 2.0 + rho * rng.standard_normal((size, 6))
        accepted = np.all((mu_s > 0) & (mu_r > 0) & (mu_s <= mu_r), axis=1)
        p = accepted.mean()

        expected = 1.0 / p
        se_trials = math.sqrt((1 - p) / p ** 2 / trials)
        se_oracle = math.sqrt(p * (1 - p) / size) / p ** 2
        self.assertLess(abs(attempts.mean() - expected), 4 * math.hypot(se_trials, se_oracle))

    def test_redraw_budget(self):
        spec = SweepSpec(max_redraws=1)
        with self.assertRaises(SamplingError):
            sample_team(spec, 50.0, 0)

    def test_bad_arguments(self):
        with self.assertRaises(DomainError):
            sample_team(self.spec, -0.1, 0)
        with self.assertRaises(DomainError):
            sample_team(self.spec, 0.1, -1)

    def test_spec_validation(self):
        bad = [
            {'n_players': 0},
            {'mean_mu_s': 3.0, 'mean_mu_r': 2.0},
            {'rho_grid': (0.2, 0.1)},
            {'rho_grid': ()},
            {'trials_per_rho': 0},
            {'model_family': 'logistic'},
            {'r_s': 0.0},
            {'seed': -1},
        ]
        for kwargs in bad:
            with self.assertRaises(ConfigError, msg=str(kwargs)):
                SweepSpec(**kwargs)


class TestSweep(unittest.TestCase):
    """End-to-end sweep on a small grid."""

    @classmethod
    def setUpClass(cls):
        cls.spec = SweepSpec(rho_grid=(0.0, 0.3), trials_per_rho=3)
        cls.settings = SolverSettings()
        cls.records = run_sweep(cls.spec, settings=cls.settings, threads=1, progress=False)

    def test_records_sorted_and_complete(self):
        keys = [(r.rho, r.trial) for r in self.records]
        self.assertEqual(keys, [(0.0, 0), (0.0, 1), (0.0, 2), (0.3, 0), (0.3, 1), (0.3, 2)])
        self.assertTrue(all(r.ok for r in self.records), [r.status for r in self.records])

    def test_homogeneous_rows_agree(self):
        rows = [r for r in self.records if r.rho == 0.0]
        poa = [r.metric('poa') for r in rows]
        self.assertEqual(len(set(r.config_digest for r in rows)), 1)
        self.assertLess(max(poa) - min(poa), 1e-12)
        self.assertGreater(poa[0], 1.0)

    def test_metrics_within_bounds(self):
        for record in self.records:
            if record.precond_ok:
                self.assertTrue(record.report.within_bounds, record.to_row())
            self.assertGreaterEqual(record.metric('poa'), 1.0 - 1e-9)
            self.assertTrue(record.floor_ok)

    def test_rerun_is_identical(self):
        again = run_sweep(self.spec, settings=self.settings, threads=1, progress=False)
        self.assertEqual([r.to_row() for r in again], [r.to_row() for r in self.records])

    def test_summary(self):
        summary = summarize(self.records)
        self.assertEqual(list(summary['rho']), [0.0, 0.3])
        self.assertEqual(list(summary['trials']), [3, 3])
        self.assertEqual(list(summary['errors']), [0, 0])
        self.assertAlmostEqual(summary.loc[0, 'poa_mean'], self.records[0].metric('poa'), delta=1e-12)
        self.assertIn('profile_gap_max', summary.columns)

    def test_csv_output(self):
        with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
            records_path, summary_path = write_csvs(self.records, first)
            write_csvs(self.records, second)
            with open(records_path, 'rb') as f:
                content = f.read()
            self.assertTrue(content.startswith((','.join(RECORD_COLUMNS) + '\n').encode('utf-8')))
            self.assertNotIn(b'\r\n', content)
            for name in ('records.csv', 'summary.csv'):
                with open(os.path.join(first, name), 'rb') as a, open(os.path.join(second, name), 'rb') as b:
                    self.assertEqual(a.read(), b.read())
            frame = pd.read_csv(records_path)
            self.assertEqual(len(frame), len(self.records))
            self.assertAlmostEqual(frame['poa'].iloc[0], self.records[0].metric('poa'), delta=1e-14)

    @patch('src.experiments.sweep.analyze')
    def test_failures_become_error_rows(self, mock_analyze):
        mock_analyze.side_effect = RuntimeError("solver exploded")
        spec = SweepSpec(rho_grid=(0.0,), trials_per_rho=2)
        records = run_sweep(spec, settings=self.settings, threads=1, progress=False)
        self.assertEqual([r.status for r in records], ['error:RuntimeError'] * 2)
        self.assertTrue(math.isnan(records[0].metric('poa')))
        summary = summarize(records)
        self.assertEqual(int(summary.loc[0, 'errors']), 2)


class TestHeterogeneityTrends(unittest.TestCase):
    """Mean PoA grows with rho while the equilibrium drifts toward the optimum."""

    @classmethod
    def setUpClass(cls):
        spec = SweepSpec(rho_grid=(0.0, 0.05, 0.5), trials_per_rho=40)
        records = run_sweep(spec, settings=SolverSettings(), threads=1, progress=False)
        cls.summary = summarize(records).set_index('rho')

    def test_no_failed_trials(self):
        self.assertEqual(int(self.summary['errors'].sum()), 0)

    def test_mean_poa_rises_with_rho(self):
        poa = list(self.summary['poa_mean'])
        self.assertLess(poa[0], poa[1])
        self.assertLess(poa[1], poa[2])

    def test_profile_gap_shrinks_at_high_rho(self):
        self.assertLess(self.summary.loc[0.5, 'profile_gap_mean'], self.summary.loc[0.05, 'profile_gap_mean'])


@unittest.skipUnless(os.getenv('CPR_RUN_SLOW'), "set CPR_RUN_SLOW=1 for the full default sweep")
class TestDefaultSweep(unittest.TestCase):
    """The documented sweep: 11 rho values x 200 trials."""

    def test_bounds_hold_everywhere(self):
        records = run_sweep(default_sweep_spec(), settings=SolverSettings(threads=os.cpu_count() or 1),
                            progress=False)
        self.assertEqual(len(records), 11 * 200)
        for record in records:
            self.assertTrue(record.ok, record.status)
            if record.precond_ok:
                self.assertTrue(record.report.within_bounds, record.to_row())
        summary = summarize(records).set_index('rho')
        self.assertGreater(summary.loc[0.5, 'poa_mean'], summary.loc[0.05, 'poa_mean'])
        self.assertGreater(summary.loc[0.05, 'poa_mean'], summary.loc[0.0, 'poa_mean'])
        self.assertLess(summary.loc[0.5, 'profile_gap_mean'], summary.loc[0.05, 'profile_gap_mean'])


def run_tests():
    """Run all tests."""
    print("🧪 Running experiment tests")
    print("=" * 50)

    loader = unittest.TestLoader()
    suite = loader.loadTestsFromModule(sys.modules[__name__])
    result = unittest.TextTestRunner(verbosity=2).run(suite)

    success = result.wasSuccessful()
    print(f"\n{'✅ All tests passed!' if success else '❌ Some tests failed!'}")
    return success


if __name__ == "__main__":
    sys.exit(0 if run_tests() else 1)
