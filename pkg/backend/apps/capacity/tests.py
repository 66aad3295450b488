import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from apps.core.exceptions import HypothesisError, LPStallError, UnboundedLPError
from apps.measure.generators import interval_grid, off_support_grid
from apps.measure.measures import growth_centers
from apps.phi.functions import PhiZero, PowerPhi

from .estimators import (
    UNBOUNDED,
    WIDE_SET,
    CapacityMethod,
    ComparisonRow,
    FunctionalOptions,
    bessel_comparison,
    bessel_surrogate,
    build_capacity_lp,
    gamma_op_estimate,
    gamma_phi_plus_lower,
    gamma_star_estimate,
    op_vs_star,
    refinement_study,
    riesz_functional,
    star_vs_plus,
    wolff_capacity_functional,
    wolff_functional_value,
)
from .serializers import CapacityEstimateSerializer, LinearProgramSerializer, LPSolutionSerializer
from .simplex import LinearProgram, enumerate_vertices, lp_solve, verify_lp_certificate

NO_GRID = np.empty((0, 1))


class SimplexTests(SimpleTestCase):
    """Test dense primal simplex with Bland's rule"""

    def test_box(self):
        """Test max m1 + m2 with m1 <= 1, m2 <= 2 is 3"""
        solution = lp_solve(LinearProgram([1.0, 1.0], [[1.0, 0.0], [0.0, 1.0]], [1.0, 2.0]))
        self.assertEqual(solution.value, 3.0)
        self.assertEqual(solution.x.tolist(), [1.0, 2.0])
        self.assertEqual(solution.binding, (0, 1))

    def test_aggregate(self):
        """Test max sum m with sum m <= 5 is 5"""
        solution = lp_solve(LinearProgram([1.0, 1.0, 1.0], [[1.0, 1.0, 1.0]], [5.0]))
        self.assertEqual(solution.value, 5.0)
        self.assertEqual(solution.duals.tolist(), [1.0])

    def test_unbounded(self):
        """Test an unconstrained direction raises UnboundedLPError"""
        with self.assertRaises(UnboundedLPError):
            lp_solve(LinearProgram([1.0, 1.0], [[1.0, -1.0]], [1.0]))

    def test_pivot_budget(self):
        """Test running out of pivots raises LPStallError with the basis"""
        lp = LinearProgram([1.0, 1.0], [[1.0, 0.0], [0.0, 1.0]], [1.0, 2.0])
        with self.assertRaises(LPStallError) as ctx:
            lp_solve(lp, max_pivots=0)
        self.assertIn('basic', ctx.exception.basis)

    def test_rejects_infeasible_origin(self):
        """Test negative right-hand sides are refused"""
        with self.assertRaises(ValueError):
            LinearProgram([1.0], [[1.0]], [-1.0])

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_matches_vertex_enumeration(self, seed):
        """Test the simplex optimum equals brute-force vertex enumeration"""
        rng = np.random.default_rng(seed)
        n, m = int(rng.integers(1, 6)), int(rng.integers(1, 9))
        A = rng.uniform(-0.5, 1.0, size=(m, n))
        A = np.vstack([A, np.ones((1, n))])
        lp = LinearProgram(rng.uniform(-1.0, 1.0, size=n), A, rng.uniform(0.0, 2.0, size=m + 1))
        solution = lp_solve(lp)
        expected, _ = enumerate_vertices(lp)
        self.assertAlmostEqual(solution.value, max(expected, 0.0), delta=1e-9 * max(1.0, abs(expected)))
        self.assertTrue(verify_lp_certificate(lp, solution).passed)

    def test_eight_variables(self):
        """Test an 8-variable program against enumeration"""
        rng = np.random.default_rng(10)
        A = np.vstack([rng.uniform(0.0, 1.0, size=(4, 8)), np.eye(8)])
        lp = LinearProgram(rng.uniform(0.1, 1.0, size=8), A, rng.uniform(0.5, 1.5, size=12))
        expected, _ = enumerate_vertices(lp)
        self.assertAlmostEqual(lp_solve(lp).value, expected, delta=1e-9)


class CapacityLPTests(SimpleTestCase):
    """Test the LP capacity estimates"""

    def test_single_candidate(self):
        """Test one candidate gives phi(h) for both LP estimates"""
        phi, h = PowerPhi(0.5), 0.1
        plus = gamma_phi_plus_lower([[0.0]], phi, h, eval_points=NO_GRID)
        star = gamma_star_estimate([[0.0]], phi, h, eval_points=NO_GRID)
        self.assertAlmostEqual(plus.value, phi(h), delta=1e-15)
        self.assertAlmostEqual(star.value, plus.value, delta=1e-15)
        self.assertEqual(plus.method, CapacityMethod.LP_GAMMA_PLUS)

    def test_single_candidate_with_default_grid(self):
        """Test the off-support grid rows bind below phi(h) for one candidate"""
        phi, h = PowerPhi(0.5), 0.1
        plus = gamma_phi_plus_lower([[0.0]], phi, h)
        self.assertGreater(plus.value, 0.0)
        self.assertLess(plus.value, phi(h))

    def test_two_points_match_enumeration(self):
        """Test two candidates at distance 1 solve to the enumerated optimum"""
        phi, h = PowerPhi(0.5), 0.1
        points = [[0.0], [1.0]]
        program = build_capacity_lp(points, phi, h, n_per_axis=8).program
        expected, _ = enumerate_vertices(program)
        estimate = gamma_phi_plus_lower(points, phi, h, n_per_axis=8)
        self.assertAlmostEqual(estimate.value, expected, delta=1e-9)
        self.assertLessEqual(estimate.value, 2 * phi(h) * (1 + 1e-12))
        self.assertTrue(estimate.certificate['certified'])

    def test_star_never_exceeds_plus(self):
        """Test bounding every truncation admits less mass"""
        points = np.array([[0.0], [0.3], [0.45], [1.1], [2.0], [3.7]])
        row = star_vs_plus(points, PhiZero(), 0.05, n_per_axis=8)
        self.assertLessEqual(row.second, row.first * (1 + 1e-10))

    def test_monotone_in_candidates(self):
        """Test adding candidates never lowers the estimate on a shared grid"""
        phi, h = PowerPhi(0.7), 0.1
        small = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.6]])
        large = np.vstack([small, [[0.7, 0.7], [0.3, 0.9]]])
        options = {
            'eval_points': np.vstack([small, off_support_grid(small, h, 6)]),
            'include_atoms': False,
            'centers': growth_centers(small),
        }
        first = gamma_phi_plus_lower(small, phi, h, **options).value
        second = gamma_phi_plus_lower(large, phi, h, **options).value
        self.assertLessEqual(first, second * (1 + 1e-10))

    def test_power_dilation(self):
        """Test plus(2E, 2h) = 2**s plus(E, h) for t**s"""
        phi, h = PowerPhi(0.3), 0.1
        points = np.array([[0.0], [0.3], [0.45], [1.0]])
        base = gamma_phi_plus_lower(points, phi, h, n_per_axis=8).value
        dilated = gamma_phi_plus_lower(2 * points, phi, 2 * h, n_per_axis=8).value
        self.assertAlmostEqual(dilated / base, 2 ** 0.3, delta=1e-9)

    def test_separation_required(self):
        """Test candidates closer than h are refused"""
        with self.assertRaises(ValueError):
            gamma_phi_plus_lower([[0.0], [0.05]], PowerPhi(0.5), 0.1)

    def test_operator_estimate_for_two_atoms(self):
        """Test equal atoms scale to the growth branch at r = h, twice"""
        phi, h = PowerPhi(0.5), 0.1
        estimate = gamma_op_estimate([[0.0], [1.0]], phi, h, profile=np.ones(2))
        self.assertAlmostEqual(estimate.value, 2 * phi(h), delta=1e-12)
        self.assertEqual(estimate.certificate['limited_by'], 'growth')
        self.assertAlmostEqual(estimate.certificate['operator_norm'], 1.0, delta=1e-6)
        self.assertTrue(estimate.certificate['certified'])

    def test_operator_estimate_of_zero_profile(self):
        """Test a zero profile gives zero"""
        estimate = gamma_op_estimate([[0.0], [1.0]], PowerPhi(0.5), 0.1, profile=np.zeros(2))
        self.assertEqual(estimate.value, 0.0)

    def test_operator_from_star_profile(self):
        """Test the operator estimate built on the star certificate is positive and feasible"""
        points = np.array([[0.0, 0.0], [0.4, 0.1], [0.1, 0.5], [0.6, 0.6]])
        row = op_vs_star(points, PowerPhi(0.5), 0.1, instance_id=7, n_per_axis=6)
        self.assertEqual((row.instance_id, row.n_atoms), (7, 4))
        self.assertGreater(row.first, 0.0)
        self.assertGreater(row.second, 0.0)

    def test_refinement(self):
        """Test one row per grid and gamma_star below gamma_plus"""
        rows = refinement_study(0.05, PhiZero(), counts=(4, 8), n_per_axis=8)
        self.assertEqual(len(rows), 2)
        for _, _, plus, star in rows:
            self.assertLessEqual(star, plus * (1 + 1e-10))


class FunctionalTests(SimpleTestCase):
    """Test Wolff capacity functionals"""

    def test_two_equal_atoms_punctured(self):
        """Test the punctured functional of two equal atoms is 2**1.5 phi(l)"""
        phi, ell = PhiZero(), 0.2
        for m in (0.1, 1.0, 7.0):
            value = wolff_functional_value([[0.0], [ell]], [m, m], phi)
            self.assertAlmostEqual(value, 2 ** 1.5 * phi(ell), delta=1e-12)

    def test_single_atom_punctured(self):
        """Test one atom has zero punctured energy and an infinite functional"""
        self.assertEqual(wolff_functional_value([[0.0]], [1.0], PowerPhi(0.5)), math.inf)
        estimate = wolff_capacity_functional([[0.0]], PowerPhi(0.5), 0.1, FunctionalOptions(puncture=True))
        self.assertTrue(estimate.unbounded)
        self.assertIn(UNBOUNDED, estimate.flags)

    def test_regularised_two_atoms(self):
        """Test the regularised optimum of two atoms puts equal masses"""
        phi, h, ell = PowerPhi(0.5), 0.1, 1.0
        estimate = wolff_capacity_functional([[0.0], [ell]], phi, h)
        a, b = 0.5 / phi(h) ** 2, 0.5 / phi(ell) ** 2
        self.assertAlmostEqual(estimate.value, (a / 4 + 3 * b / 4) ** -0.5, delta=1e-8)
        np.testing.assert_allclose(estimate.masses, [0.5, 0.5], atol=1e-6)

    def test_riesz_needs_power(self):
        """Test the Riesz functional refuses phi_0"""
        with self.assertRaises(HypothesisError):
            riesz_functional([[0.0], [1.0]], PhiZero(), 0.1)
        estimate = riesz_functional([[0.0], [1.0]], PowerPhi(0.5), 0.1)
        self.assertTrue(math.isfinite(estimate.value))

    def test_bessel_far_atoms(self):
        """Test atoms at distance >= 1 only see the regularised diagonal and flag wide sets"""
        estimate = bessel_surrogate([[0.0], [2.0]], 0.1)
        self.assertIn(WIDE_SET, estimate.flags)
        # only i = j = l terms: E = log(10) (m1**3 + m2**3), minimised at equal masses
        self.assertAlmostEqual(estimate.value, (math.log(10.0) / 4) ** -0.5, delta=1e-8)

    def test_bessel_comparison_rows(self):
        """Test a short radius grid yields finite ratios for each radius"""
        report = bessel_comparison(r_grid=np.exp(-np.arange(3.0, 6.0)), n_atoms=8, n_per_axis=6)
        self.assertEqual(len(report.rows), 3)
        self.assertTrue(all(row[3] > 0 and row[4] > 0 for row in report.rows))
        self.assertTrue(math.isfinite(report.spread))

    def test_comparison_ratio(self):
        """Test ratio conventions for zero denominators"""
        self.assertEqual(ComparisonRow(0, 2, 1.0, 0.0).ratio, math.inf)
        self.assertTrue(math.isnan(ComparisonRow(0, 2, 0.0, 0.0).ratio))
        self.assertEqual(ComparisonRow(0, 2, 3.0, 1.5).ratio, 2.0)


class CapacitySerializerTests(SimpleTestCase):
    """Test program, solution and estimate serializers"""

    def test_program(self):
        """Test a valid program is built and solved"""
        serializer = LinearProgramSerializer(data={'c': [1, 1], 'A': [[1, 0], [0, 1]], 'b': [1, 2]})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        data = LPSolutionSerializer(lp_solve(serializer.save())).data
        self.assertEqual(data['value'], 3.0)
        self.assertEqual(data['x'], [1.0, 2.0])

    def test_ragged_rows(self):
        """Test rows of the wrong length are reported on A"""
        serializer = LinearProgramSerializer(data={'c': [1, 1], 'A': [[1]], 'b': [1]})
        self.assertFalse(serializer.is_valid())
        self.assertIn('A', serializer.errors)

    def test_negative_rhs(self):
        """Test a negative right-hand side is reported on b"""
        serializer = LinearProgramSerializer(data={'c': [1], 'A': [[1]], 'b': [-1]})
        self.assertFalse(serializer.is_valid())
        self.assertIn('b', serializer.errors)

    def test_estimate(self):
        """Test estimates carry method, flags and a stable digest"""
        points = interval_grid(3, 0.5)
        first = gamma_phi_plus_lower(points, PowerPhi(0.5), 0.1, n_per_axis=6)
        second = gamma_phi_plus_lower(points, PowerPhi(0.5), 0.1, n_per_axis=6)
        data = CapacityEstimateSerializer(first).data
        self.assertEqual(data['method'], 'lp_gamma_plus')
        self.assertEqual(data['digest'], second.digest())
        self.assertEqual(len(data['digest']), 64)
        infinite = CapacityEstimateSerializer(
            wolff_capacity_functional([[0.0]], PowerPhi(0.5), 0.1, FunctionalOptions(puncture=True))
        ).data
        self.assertEqual(infinite['value'], 'inf')
