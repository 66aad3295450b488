import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from apps.core.exceptions import HypothesisError
from apps.measure.generators import line_points, random_measure, uniform_measure
from apps.measure.measures import AtomicMeasure
from apps.phi.functions import PhiZero, PowerPhi

from .ratios import (
    RatioRecord,
    dilation_pair,
    energy_lower_ratio,
    energy_upper_ratio,
    lower_ratio_reference,
    mass_scaling_pair,
    norm_vs_wolff_sup,
    ratio_corpus,
)
from .serializers import NormWolffReportSerializer, RatioCorpusSummarySerializer, RatioRecordSerializer


def two_atoms(m=0.7, ell=0.3, d=1):
    points = np.zeros((2, d))
    points[1, 0] = ell
    return AtomicMeasure(points, [m, m])


class UpperRatioTests(SimpleTestCase):
    """Test truncated energy over punctured Wolff energy"""

    def test_single_atom_subset(self):
        """Test a one-atom Q reports 0 with both sides 0"""
        record = energy_upper_ratio(two_atoms(), PowerPhi(0.5), q=[0])
        self.assertEqual((record.energy, record.wolff, record.ratio), (0.0, 0.0, 0.0))
        self.assertFalse(record.anomalous)

    def test_two_equal_atoms(self):
        """Test energy 2 m**3/phi**2 against Wolff m**3/phi**2"""
        phi, m, ell = PhiZero(), 0.7, 0.3
        record = energy_upper_ratio(two_atoms(m, ell), phi)
        self.assertAlmostEqual(record.energy, 2 * m ** 3 / phi(ell) ** 2, delta=1e-12 * record.energy)
        self.assertAlmostEqual(record.wolff, m ** 3 / phi(ell) ** 2, delta=1e-12 * record.wolff)
        self.assertAlmostEqual(record.ratio, 2.0, delta=1e-12)
        self.assertEqual(record.eps, 0.15)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1), factor=st.floats(min_value=0.01, max_value=100.0))
    def test_mass_scaling(self, seed, factor):
        """Test the ratio does not change when every mass is scaled"""
        mu = random_measure(np.random.default_rng(seed), 10, 2)
        before, after = mass_scaling_pair(mu, PhiZero(), factor)
        self.assertAlmostEqual(after / before, 1.0, delta=1e-12)

    def test_dilation_for_powers_only(self):
        """Test dilation invariance for t**s and its refusal for phi_0"""
        mu = random_measure(np.random.default_rng(1), 12, 2)
        before, after = dilation_pair(mu, PowerPhi(0.3), 2.0)
        self.assertAlmostEqual(after / before, 1.0, delta=1e-9)
        with self.assertRaises(HypothesisError):
            dilation_pair(mu, PhiZero(), 2.0)


class LowerRatioTests(SimpleTestCase):
    """Test energy over Wolff energy against the reference constant"""

    def test_reference_constant(self):
        """Test c(s) is below 1/12 and refuses s outside (0, 1)"""
        for s in (0.1, 0.5, 0.9):
            self.assertLess(lower_ratio_reference(s), 1.0 / 12.0)
        with self.assertRaises(HypothesisError):
            lower_ratio_reference(1.0)

    def test_two_equal_atoms(self):
        """Test the ratio 2 exceeds c(s)"""
        for phi in (PowerPhi(0.3), PowerPhi(0.7), PhiZero()):
            record = energy_lower_ratio(two_atoms(), phi)
            self.assertAlmostEqual(record.ratio, 2.0, delta=1e-12)
            self.assertFalse(record.violation)

    def test_needs_concave_s_below_one(self):
        """Test convex functions are refused"""
        with self.assertRaises(HypothesisError):
            energy_lower_ratio(two_atoms(), PowerPhi(1.5))

    def test_collinear_ratios_stay_above_reference(self):
        """Test equally spaced atoms on a line keep the ratio above c(s)"""
        phi = PowerPhi(0.5)
        for n in (3, 8, 16):
            record = energy_lower_ratio(uniform_measure(line_points(n, 1.0)), phi)
            self.assertGreater(record.ratio, record.reference)
            self.assertEqual(record.n_atoms, n)


class NormWolffTests(SimpleTestCase):
    """Test operator norm against the supremum of the metric Wolff potential"""

    def test_single_atom(self):
        """Test a single atom reports zeros"""
        report = norm_vs_wolff_sup(AtomicMeasure([[0.0]], [2.0]), PowerPhi(0.5))
        self.assertEqual((report.norm_squared, report.wolff_sup, report.upper_ratio), (0.0, 0.0, 0.0))

    def test_two_equal_atoms(self):
        """Test the upper ratio of two equal atoms is 2s for t**s"""
        for s in (0.3, 0.7):
            m, ell = 0.5, 0.25
            report = norm_vs_wolff_sup(two_atoms(m, ell), PowerPhi(s))
            self.assertAlmostEqual(report.norm_squared, m * m / ell ** (2 * s), delta=1e-8 * report.norm_squared)
            self.assertAlmostEqual(report.wolff_sup, m * m / (2 * s * ell ** (2 * s)), delta=1e-10 * report.wolff_sup)
            self.assertAlmostEqual(report.upper_ratio, 2 * s, delta=1e-8)


class RatioCorpusTests(SimpleTestCase):
    """Test corpus summaries"""

    def record(self, ratio, n_atoms=5, reference=math.nan, energy=1.0, wolff=1.0):
        return RatioRecord(0, energy, wolff, ratio, 'power(exponent=0.5)', 0.5, n_atoms, reference=reference)

    def test_summary(self):
        """Test quantiles and spread skip single atoms and count violations"""
        records = [
            self.record(1.0, reference=0.5),
            self.record(4.0, reference=0.5),
            self.record(0.25, reference=0.5),
            self.record(0.0, n_atoms=1, reference=0.5),
        ]
        summary = ratio_corpus(records)
        self.assertEqual(summary.count, 3)
        self.assertEqual(summary.spread, 16.0)
        self.assertEqual(summary.quantiles['q50'], 1.0)
        self.assertEqual(summary.violations, 1)
        self.assertEqual(summary.min_margin, -0.25)
        self.assertFalse(summary.passed)

    def test_anomaly(self):
        """Test zero Wolff energy with positive energy is counted"""
        summary = ratio_corpus([self.record(math.inf, wolff=0.0), self.record(2.0)])
        self.assertEqual(summary.anomalies, 1)
        self.assertEqual(summary.count, 1)

    def test_empty(self):
        """Test an empty corpus reports no counts"""
        data = RatioCorpusSummarySerializer(ratio_corpus([])).data
        self.assertEqual(data['count'], 0)
        self.assertIsNone(data['spread'])

    def test_record_representation(self):
        """Test a record without reference serializes null"""
        data = RatioRecordSerializer(energy_upper_ratio(two_atoms(), PowerPhi(0.5))).data
        self.assertIsNone(data['reference'])
        self.assertFalse(data['violation'])
        report = norm_vs_wolff_sup(two_atoms(), PowerPhi(0.5))
        self.assertGreater(NormWolffReportSerializer(report).data['upper_ratio'], 0.0)
