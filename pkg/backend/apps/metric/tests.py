import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from apps.core.exceptions import RangeError
from apps.measure.measures import AtomicMeasure
from apps.phi.functions import Convexity, PhiZero, PowerPhi, TabulatedPhi

from .calderon import CZConstants, ball_correspondence_check, smoothness_candidate, verify_cz_kernel
from .psi import (
    brute_force_psi,
    check_metric_axioms,
    check_sandwich,
    compute_psi,
    identity_gap,
    induced_distance,
)


def convex_table():
    t = np.geomspace(1e-3, 10.0, 200)
    return TabulatedPhi(t, t ** 2 + t ** 3, declared_convexity=Convexity.CONVEX)


class PsiTableTests(SimpleTestCase):
    """Test the subadditive minorant psi"""

    def test_power_gives_identity(self):
        """Test psi(r) = r for t**s"""
        for s in (0.3, 0.7, 1.0):
            psi = compute_psi(PowerPhi(s), 2.0, 512)
            self.assertLess(identity_gap(psi), 1e-12)

    def test_sandwich_for_phi_zero(self):
        """Test g/2 <= psi <= g on every node"""
        psi = compute_psi(PhiZero(), 2.0, 2048)
        report = check_sandwich(psi)
        self.assertTrue(report.passed)
        self.assertEqual(report.nodes, 2049)

    def test_table_matches_exhaustive_search(self):
        """Test the recurrence equals the minimum over all compositions for k <= 12"""
        for phi in (PhiZero(), convex_table()):
            psi = compute_psi(phi, 0.6, 12)
            for k in range(1, 13):
                expected = brute_force_psi(phi, psi.step, k)
                self.assertAlmostEqual(psi.values[k], expected, delta=1e-12 * expected)

    def test_table_is_increasing_and_subadditive(self):
        """Test psi grows and psi[j + k] <= psi[j] + psi[k] on the grid"""
        psi = compute_psi(PhiZero(), 1.0, 256)
        v = psi.values
        self.assertTrue(np.all(np.diff(v) > 0))
        j, k = np.meshgrid(np.arange(129), np.arange(128), indexing='ij')
        self.assertTrue(np.all(v[j + k] <= v[j] + v[k] + 1e-12))

    def test_out_of_range_separation(self):
        """Test separations beyond r_max raise RangeError"""
        psi = compute_psi(PowerPhi(0.5), 1.0, 16)
        with self.assertRaises(RangeError):
            psi(1.5)
        with self.assertRaises(RangeError):
            psi(-0.1)

    def test_grid_arguments(self):
        """Test a single interval or a nonpositive range is refused"""
        with self.assertRaises(ValueError):
            compute_psi(PowerPhi(0.5), 1.0, 1)
        with self.assertRaises(ValueError):
            compute_psi(PowerPhi(0.5), 0.0, 16)


class InducedDistanceTests(SimpleTestCase):
    """Test dist(x, y) = psi(|x - y|)"""

    def setUp(self):
        self.power = compute_psi(PowerPhi(0.5), 4.0, 1024)
        self.zero = compute_psi(PhiZero(), 4.0, 1024)

    def test_coincident_points(self):
        """Test dist(x, x) = 0"""
        self.assertEqual(induced_distance(self.zero, [0.3, 0.4], [0.3, 0.4]), 0.0)

    def test_power_is_euclidean(self):
        """Test the power metric is the Euclidean distance"""
        self.assertAlmostEqual(induced_distance(self.power, [0.0, 0.0], [0.6, 0.8]), 1.0, delta=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=6, max_size=6))
    def test_triangle_inequality(self, coords):
        """Test dist(x, z) <= dist(x, y) + dist(y, z) for random triples"""
        x, y, z = np.reshape(coords, (3, 2))
        lhs = induced_distance(self.zero, x, z)
        rhs = induced_distance(self.zero, x, y) + induced_distance(self.zero, y, z)
        self.assertLessEqual(lhs, rhs + 1e-12)

    def test_sampled_axioms(self):
        """Test no sampled triple breaks symmetry or the triangle inequality"""
        rng = np.random.default_rng(3)
        self.assertEqual(check_metric_axioms(self.zero, rng, samples=10000), 0)


class CalderonZygmundTests(SimpleTestCase):
    """Test sampled size and smoothness constants of the phi-kernel"""

    def test_constants_validation(self):
        """Test A must be positive and delta in (0, 1]"""
        with self.assertRaises(ValueError):
            CZConstants(A=0.0, s=0.5)
        with self.assertRaises(ValueError):
            CZConstants(A=1.0, s=0.5, delta=1.5)

    def test_power_size_is_one(self):
        """Test |K| dist**s = 1 up to rounding for t**s"""
        phi = PowerPhi(0.5)
        constants, report = verify_cz_kernel(phi, compute_psi(phi, 2.0, 2048), 2000, rng_seed=1)
        self.assertTrue(report.size_passed)
        self.assertAlmostEqual(report.size_max, 1.0, delta=1e-9)
        self.assertEqual(constants.A, smoothness_candidate(0.5))

    def test_phi_zero_estimates_hold(self):
        """Test both estimates hold for phi_0 on a sampled corpus"""
        phi = PhiZero()
        _, report = verify_cz_kernel(phi, compute_psi(phi, 2.0, 2048), 5000, rng_seed=2)
        self.assertTrue(report.passed)
        self.assertLessEqual(report.size_max, 1.0 + 1e-12)
        self.assertEqual(len(report.smooth_witness), 3)

    def test_same_seed_same_report(self):
        """Test sampling is reproducible from the seed"""
        phi = PowerPhi(0.7)
        psi = compute_psi(phi, 2.0, 256)
        _, first = verify_cz_kernel(phi, psi, 500, rng_seed=9)
        _, second = verify_cz_kernel(phi, psi, 500, rng_seed=9)
        self.assertEqual(first.smooth_max, second.smooth_max)
        self.assertEqual(first.size_witness, second.size_witness)


class BallCorrespondenceTests(SimpleTestCase):
    """Test Euclidean balls against metric balls"""

    def test_same_atoms_and_bounded_ratios(self):
        """Test both ball families hold the same atoms and the growth ratios are bounded"""
        rng = np.random.default_rng(11)
        mu = AtomicMeasure(rng.uniform(size=(20, 2)), rng.uniform(0.5, 1.5, size=20))
        for phi in (PowerPhi(0.5), PhiZero()):
            report = ball_correspondence_check(phi, compute_psi(phi, 2.0, 1024), mu)
            self.assertEqual(report.mismatches, 0)
            self.assertTrue(report.passed)
            self.assertLessEqual(report.forward_ratio, 2.0 ** phi.s_doubling * (1 + 1e-12))

    def test_empty_measure(self):
        """Test the empty measure gives an empty report"""
        report = ball_correspondence_check(PowerPhi(0.5), compute_psi(PowerPhi(0.5), 1.0, 8),
                                           AtomicMeasure.empty(2))
        self.assertEqual(report.samples, 0)
        self.assertTrue(report.passed)
