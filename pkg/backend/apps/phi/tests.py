import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from apps.core.arrays import geometric_grid
from apps.core.exceptions import InvalidFunctionError

from .functions import (
    Convexity,
    PhiFunction,
    PhiZero,
    PowerPhi,
    TabulatedPhi,
    dyadic_lambda_bound,
    phi_from_spec,
    validate_phi,
    verify_growth_integral,
)
from .serializers import PhiSpecSerializer, ValidationReportSerializer

GRID = geometric_grid(2.0 ** -10, 2.0 ** 10, 201)


class BrokenPhi(PhiFunction):
    """t**0.5 that overflows beyond t = 100."""

    family = 'broken'
    s_doubling = 0.5
    convexity = Convexity.CONCAVE

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 100, np.inf, np.sqrt(np.maximum(t, 0.0)))

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return 0.5 / np.sqrt(t)


class StepPhi(PhiFunction):
    """Flat between 1 and 2, so not strictly increasing."""

    family = 'step'
    s_doubling = 1.0
    convexity = Convexity.CONCAVE

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 1, t, np.where(t < 2, 1.0, t - 1.0))

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= 1) & (t < 2), 0.0, 1.0)


class ValidatePhiTests(SimpleTestCase):
    """Test property checks of class Phi on a grid"""

    def test_square_root_passes_with_exact_exponent(self):
        """Test t**0.5 passes every check with s_hat = 0.5"""
        report = validate_phi(PowerPhi(0.5), GRID)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.s_hat, 0.5, delta=1e-12)
        self.assertEqual(report.convexity, Convexity.CONCAVE)
        self.assertIn('ratio', report.checks)

    def test_square_is_convex(self):
        """Test t**2 passes as a convex function with s_hat = 2"""
        report = validate_phi(PowerPhi(2.0), GRID)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.s_hat, 2.0, delta=1e-12)
        self.assertEqual(report.convexity, Convexity.CONVEX)
        self.assertNotIn('ratio', report.checks)

    def test_phi_zero_has_exponent_below_one(self):
        """Test the default phi_0 passes on [e^-10, 1] with s_hat < 1"""
        grid = geometric_grid(math.exp(-10), 1.0, 200)
        report = validate_phi(PhiZero(), grid)
        self.assertTrue(report.passed)
        self.assertLess(report.s_hat, 1.0)
        self.assertTrue(report.notes)

    def test_non_finite_value_names_the_point(self):
        """Test an overflowing function raises InvalidFunctionError with t"""
        with self.assertRaises(InvalidFunctionError) as ctx:
            validate_phi(BrokenPhi(), GRID)
        self.assertGreater(ctx.exception.t, 100)

    def test_flat_piece_fails_monotonicity(self):
        """Test a flat stretch fails check I at a point inside it"""
        report = validate_phi(StepPhi(), geometric_grid(0.25, 4.0, 33))
        self.assertFalse(report.passed)
        self.assertFalse(report.checks['I'].passed)
        self.assertTrue(1.0 <= report.checks['I'].worst_t <= 2.0)

    def test_understated_exponent_fails_doubling(self):
        """Test a declared s below the true exponent fails check IV"""
        table = np.column_stack([GRID, GRID ** 0.5])
        phi = TabulatedPhi(table[:, 0], table[:, 1], declared_s=0.4)
        report = validate_phi(phi, GRID[5:-5])
        self.assertFalse(report.checks['IV'].passed)

    def test_rejects_bad_grid(self):
        """Test non-increasing grids are refused"""
        with self.assertRaises(ValueError):
            validate_phi(PowerPhi(0.5), [1.0, 0.5])
        with self.assertRaises(ValueError):
            validate_phi(PowerPhi(0.5), [])

    @settings(max_examples=50, deadline=None)
    @given(
        s=st.floats(min_value=0.05, max_value=3.0),
        t=st.floats(min_value=1e-6, max_value=1e6),
    )
    def test_power_doubling_is_exact(self, s, t):
        """Test phi(2t) = 2**s phi(t) for power functions"""
        phi = PowerPhi(s)
        self.assertAlmostEqual(phi(2 * t) / phi(t), 2.0 ** s, delta=1e-12 * 2.0 ** s)


class GrowthIntegralTests(SimpleTestCase):
    """Test estimates of the growth-integral constant"""

    def test_power_constant_matches_closed_form(self):
        """Test Lambda = 1/(d - s) for t**s"""
        r_grid = geometric_grid(1e-3, 1.0, 7)
        for s, d in ((0.5, 1), (0.3, 2), (0.9, 3)):
            estimate = verify_growth_integral(PowerPhi(s), d, r_grid)
            self.assertTrue(estimate.passed)
            self.assertAlmostEqual(estimate.value, 1.0 / (d - s), delta=1e-4 / (d - s))

    def test_dyadic_bound_holds(self):
        """Test the estimate stays below 2**s / (1 - 2**-(d-s))"""
        phi = PhiZero()
        estimate = verify_growth_integral(phi, 1, geometric_grid(1e-6, 1.0, 13))
        self.assertTrue(estimate.passed)
        self.assertLessEqual(estimate.value, dyadic_lambda_bound(phi.s_doubling, 1))

    def test_critical_exponent_is_flagged(self):
        """Test t**d does not pass in dimension d"""
        estimate = verify_growth_integral(PowerPhi(1.0), 1, geometric_grid(1e-3, 1.0, 4))
        self.assertFalse(estimate.passed)
        self.assertEqual(dyadic_lambda_bound(1.0, 1), math.inf)

    def test_dimension_must_be_positive(self):
        """Test d = 0 is refused"""
        with self.assertRaises(ValueError):
            verify_growth_integral(PowerPhi(0.5), 0, [1.0])


class PhiSpecSerializerTests(SimpleTestCase):
    """Test function specifications read from configuration files"""

    def test_power_spec(self):
        """Test a power spec builds the function"""
        serializer = PhiSpecSerializer(data={'family': 'power', 'exponent': '0.3'})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        phi = serializer.save()
        self.assertEqual(phi, PowerPhi(0.3))

    def test_power_needs_exponent(self):
        """Test the exponent is required for powers"""
        serializer = PhiSpecSerializer(data={'family': 'power'})
        self.assertFalse(serializer.is_valid())
        self.assertIn('exponent', serializer.errors)

    def test_unknown_family(self):
        """Test an unknown family name is reported on the family field"""
        serializer = PhiSpecSerializer(data={'family': 'powr', 'exponent': '0.3'})
        self.assertFalse(serializer.is_valid())
        self.assertIn('family', serializer.errors)

    def test_phi_zero_cutoff(self):
        """Test t_max must exceed the logarithmic cutoff"""
        serializer = PhiSpecSerializer(data={'family': 'phi_zero', 't_max': '0.1'})
        self.assertFalse(serializer.is_valid())
        self.assertIn('t_max', serializer.errors)

    def test_factory_defaults(self):
        """Test phi_from_spec fills the phi_0 default"""
        phi = phi_from_spec({'family': 'phi_zero'})
        self.assertEqual(phi.t_max, 2.0)

    def test_report_representation(self):
        """Test a validation report serializes its checks"""
        data = ValidationReportSerializer(validate_phi(PowerPhi(0.5), GRID)).data
        self.assertEqual(data['family'], 'power')
        self.assertEqual(data['convexity'], 'concave')
        self.assertTrue(data['checks']['IV']['passed'])
