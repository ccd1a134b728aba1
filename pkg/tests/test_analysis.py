import sys
import os
import math
import unittest
import numpy as np
from scipy import stats

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from logic import analysis, ring_hash
from logic.models import Algorithm, Layout, RingConfig, SampleBasis


class TestBalance(unittest.TestCase):
    def test_single_bucket(self):
        report = analysis.sampled_balance(Algorithm.JUMP, 1, 1000, seed=1)
        self.assertEqual(report.std_error, 0.0)
        self.assertEqual(report.ci_99, (1.0, 1.0))
        self.assertEqual(report.fractions, [1.0])

    def test_jump_sampling_noise(self):
        """jump の偏りは標本誤差 sqrt(n/N) 程度"""
        n, num_keys = 1000, 10_000_000
        report = analysis.sampled_balance(Algorithm.JUMP, n, num_keys, seed=1)
        base = math.sqrt(n / num_keys)
        self.assertTrue(0.8 * base <= report.std_error <= 1.25 * base, report.std_error)
        self.assertAlmostEqual(sum(report.fractions), 1.0, delta=1e-12)
        self.assertEqual(report.basis, SampleBasis.SAMPLED_KEYS)

    def test_ring_one_point(self):
        report = analysis.sampled_balance(Algorithm.RING_B, 1000, 1_000_000, seed=1, points=1)
        self.assertAlmostEqual(report.std_error, 1.0, delta=0.25)

    def test_too_few_keys(self):
        with self.assertRaises(ValueError):
            analysis.sampled_balance(Algorithm.JUMP, 100, 10, seed=1)
        with self.assertRaises(ValueError):
            analysis.sampled_balance(Algorithm.RING_A, 10, 1000, seed=1)

    def test_reproducible_across_threads(self):
        a = analysis.sampled_balance(Algorithm.JUMP, 37, 600_000, seed=5, threads=1)
        b = analysis.sampled_balance(Algorithm.JUMP, 37, 600_000, seed=5, threads=4)
        c = analysis.sampled_balance(Algorithm.JUMP, 37, 600_000, seed=5)
        self.assertEqual(a.model_dump(), b.model_dump())
        self.assertEqual(a.model_dump(), c.model_dump())
        d = analysis.sampled_balance(Algorithm.JUMP, 37, 600_000, seed=6)
        self.assertNotEqual(a.fractions, d.fractions)

    def test_exact_single_point(self):
        ring = ring_hash.build_ring_a(RingConfig(num_buckets=1, points_per_bucket=1))
        report = analysis.exact_ring_balance(ring)
        self.assertEqual(report.fractions, [1.0])
        self.assertEqual(report.std_error, 0.0)

    def test_exact_after_removal(self):
        ring = ring_hash.build_ring_a(RingConfig(num_buckets=10, points_per_bucket=20, seed=1))
        ring_hash.remove_bucket(ring, 3)
        report = analysis.exact_ring_balance(ring)
        self.assertEqual(report.n, 9)
        self.assertAlmostEqual(sum(report.fractions), 1.0, delta=1e-12)

    def test_ring_std_error_by_points(self):
        """σ/μ ≈ 1/sqrt(k) (5 シード平均)"""
        expected = {1: 0.9979, 10: 0.3152, 100: 0.0997, 1000: 0.0316}
        for k, want in expected.items():
            report = analysis.ring_balance_over_seeds(Layout.A, 100, k, seeds=range(5))
            self.assertTrue(0.8 * want <= report.std_error <= 1.2 * want, f"k={k}: {report.std_error}")
            self.assertEqual(report.seeds, [0, 1, 2, 3, 4])

    def test_ring_confidence_interval(self):
        report = analysis.ring_balance_over_seeds(Layout.A, 100, 1000, seeds=range(5))
        lo, hi = report.ci_99
        self.assertTrue(0.90 <= lo <= 0.94, lo)
        self.assertTrue(1.07 <= hi <= 1.12, hi)

    def test_ring_b_close_to_ring_a(self):
        a = analysis.ring_balance_over_seeds(Layout.A, 50, 100, seeds=(0,))
        b = analysis.ring_balance_over_seeds(Layout.B, 50, 100, seeds=(0,))
        self.assertAlmostEqual(a.std_error, b.std_error, delta=1e-3)

    def test_balance_table(self):
        reports = analysis.balance_table(n=50, ks=(1, 10), seeds=(0,), jump_keys=100_000)
        self.assertEqual([r.algorithm for r in reports], [Algorithm.RING_A, Algorithm.RING_A, Algorithm.JUMP])
        self.assertEqual([r.points_per_bucket for r in reports], [1, 10, None])
        self.assertGreater(reports[0].std_error, reports[1].std_error)


class TestRebalance(unittest.TestCase):
    def test_jump_10_to_12(self):
        report = analysis.rebalance_report(Algorithm.JUMP, 10, 12, 1_000_000, seed=1)
        self.assertAlmostEqual(report.moved_fraction, 1.0 / 6.0, delta=0.002)
        self.assertEqual(report.violations, 0)
        self.assertEqual(sum(report.destinations[:10]), 0)
        self.assertAlmostEqual(sum(report.donated_fractions), report.moved_fraction, delta=1e-12)

    def test_jump_10_to_11(self):
        report = analysis.rebalance_report(Algorithm.JUMP, 10, 11, 1_000_000, seed=2)
        self.assertAlmostEqual(report.moved_fraction, 1.0 / 11.0, delta=0.003)
        self.assertEqual(report.violations, 0)

    def test_no_change(self):
        for alg in (Algorithm.JUMP, Algorithm.HRW):
            report = analysis.rebalance_report(alg, 10, 10, 100_000, seed=1)
            self.assertEqual(report.moved_fraction, 0.0)
            self.assertEqual(report.donors, [])
        report = analysis.rebalance_report(Algorithm.RING_A, 10, 10, 100_000, seed=1, points=10)
        self.assertEqual(report.moved_fraction, 0.0)

    def test_shrink(self):
        report = analysis.rebalance_report(Algorithm.JUMP, 12, 10, 500_000, seed=1)
        self.assertAlmostEqual(report.moved_fraction, 1.0 / 6.0, delta=0.003)
        self.assertEqual(report.donors, [10, 11])
        self.assertEqual(report.violations, 0)

    def test_invalid_counts(self):
        with self.assertRaises(ValueError):
            analysis.rebalance_report(Algorithm.JUMP, 0, 5, 1000, seed=1)

    def test_jump_donors_even(self):
        """
        1000 → 1001 で 1000 個の全バケットが均等に 1/1001 ずつ差し出す。
        1 バケットあたりの移動キーは 10 個程度なので、個々の割合ではなく
        平均と一様性 (カイ二乗) で確かめる。
        """
        report = analysis.rebalance_report(Algorithm.JUMP, 1000, 1001, 10_000_000, seed=1)
        shares = np.array(report.donor_shares)
        self.assertAlmostEqual(float(shares.mean()), 1.0 / 1001, delta=1e-4)
        self.assertEqual(len(report.donors), 1000)
        self.assertGreaterEqual(float(np.mean(np.abs(shares - 0.001) <= 0.0005)), 0.85)

        donated = np.round(np.array(report.donated_fractions) * report.num_keys).astype(np.int64)
        _, p_value = stats.chisquare(donated)
        self.assertGreater(p_value, 0.001)
        self.assertEqual(report.destinations[1000], int(donated.sum()))

    def test_ring_donors_bounded(self):
        report = analysis.rebalance_report(Algorithm.RING_A, 100, 101, 1_000_000, seed=1, points=10)
        self.assertEqual(report.violations, 0)
        self.assertLessEqual(len(report.donors), 10)
        ring = ring_hash.build_ring_a(RingConfig(num_buckets=100, points_per_bucket=10))
        exact = analysis.donors_on_add(ring)
        self.assertTrue(set(report.donors) <= exact)
        self.assertGreaterEqual(len(report.donors), len(exact) - 1)

    def test_ring_donors_over_trials(self):
        for seed in range(100):
            ring = ring_hash.build_ring_a(RingConfig(num_buckets=1000, points_per_bucket=10, seed=seed))
            self.assertLessEqual(len(analysis.donors_on_add(ring)), 10)

    def test_hrw_growth(self):
        report = analysis.rebalance_report(Algorithm.HRW, 10, 12, 200_000, seed=1)
        self.assertEqual(report.violations, 0)
        self.assertAlmostEqual(report.moved_fraction, 1.0 / 6.0, delta=0.004)


class TestIterations(unittest.TestCase):
    def test_one_bucket(self):
        report = analysis.iteration_stats(1, 10_000, seed=1)
        self.assertEqual(report.mean_iterations, 1.0)
        self.assertEqual(report.max_iterations, 1)
        self.assertEqual(report.binary_search_comparisons, 0.0)

    def test_two_buckets(self):
        report = analysis.iteration_stats(2, 1_000_000, seed=1)
        self.assertAlmostEqual(report.mean_iterations, 1.5, delta=0.005)

    def test_harmonic_and_bound(self):
        for n in (10, 100, 1000, 1_000_000):
            report = analysis.iteration_stats(n, 100_000, seed=1)
            self.assertAlmostEqual(report.mean_iterations, report.harmonic, delta=0.05)
            self.assertTrue(report.below_bound, f"n={n}")
            self.assertAlmostEqual(report.binary_search_comparisons, math.log2(n))

    def test_reproducible(self):
        a = analysis.iteration_stats(1000, 300_000, seed=3, threads=1)
        b = analysis.iteration_stats(1000, 300_000, seed=3, threads=3)
        self.assertEqual(a.model_dump(), b.model_dump())


class TestChiSquare(unittest.TestCase):
    def test_linear_agrees_with_jump(self):
        self.assertGreater(analysis.chi_square_agreement(8, 500_000, seed=2), 0.001)


if __name__ == "__main__":
    unittest.main()
