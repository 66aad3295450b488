import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from apps.core.exceptions import HypothesisError
from apps.measure.generators import random_measure
from apps.measure.measures import AtomicMeasure
from apps.phi.functions import PhiZero, PowerPhi
from apps.transform.operators import KernelSpec, truncated_energy

from .serializers import TriangleBoundReportSerializer, TriangleCorpusSummarySerializer, TriangleSerializer
from .triangles import (
    Triangle,
    check_triangle_bounds,
    equilateral_triangle,
    lower_bound_constant,
    p_phi,
    p_phi_cyclic_sum,
    p_phi_permutation_sum,
    random_triangles,
    sorted_sides,
    symmetrize_energy,
    triangle_corpus,
)

vertex = st.floats(min_value=-1.0, max_value=1.0)


class PermutationSumTests(SimpleTestCase):
    """Test the permutation sum of a triangle"""

    def test_equilateral(self):
        """Test the unit equilateral triangle with phi(t) = t gives 3/2"""
        self.assertAlmostEqual(p_phi(equilateral_triangle(), PowerPhi(1.0)), 1.5, delta=1e-14)

    def test_half_squared_menger_curvature(self):
        """Test phi(t) = t gives c**2/2 with c = 1/R"""
        tri = Triangle([0.0, 0.0], [3.0, 0.0], [0.0, 4.0])
        # right triangle: circumradius is half the hypotenuse
        curvature = 1.0 / 2.5
        self.assertAlmostEqual(p_phi(tri, PowerPhi(1.0)), 0.5 * curvature ** 2, delta=1e-15)

    def test_collinear(self):
        """Test three collinear points with phi(t) = t give zero"""
        tri = Triangle([0.0], [1.0], [3.0])
        self.assertAlmostEqual(p_phi(tri, PowerPhi(1.0)), 0.0, delta=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(vertex, min_size=6, max_size=6))
    def test_permutations_double_the_cyclic_sum(self, coords):
        """Test the six-permutation sum is twice the closed form"""
        points = np.reshape(coords, (3, 2))
        a, b, c = sorted_sides(points[None, :, :])
        if c[0] < 1e-3:
            return
        tri = Triangle(*points)
        phi = PowerPhi(1.0)
        p = p_phi(tri, phi)
        scale = 3.0 / (c[0] * c[0])
        self.assertAlmostEqual(p_phi_permutation_sum(tri, phi), 2.0 * p, delta=1e-9 * scale)
        self.assertAlmostEqual(p_phi_cyclic_sum(tri, phi), p, delta=1e-9 * scale)

    def test_coincident_vertices(self):
        """Test repeated vertices are refused"""
        with self.assertRaises(ValueError):
            Triangle([0.0, 0.0], [0.0, 0.0], [1.0, 0.0])


class TriangleBoundTests(SimpleTestCase):
    """Test upper and lower bounds of the permutation sum"""

    def test_constant(self):
        """Test the lower constant for s = 1/2"""
        self.assertAlmostEqual(lower_bound_constant(PowerPhi(0.5)), (1 - 2 ** -0.5) / 4, delta=1e-16)

    def test_lower_bound_needs_concave_s_below_one(self):
        """Test the lower bound refuses convex phi and s >= 1"""
        with self.assertRaises(HypothesisError):
            lower_bound_constant(PowerPhi(2.0))
        with self.assertRaises(HypothesisError):
            check_triangle_bounds(PowerPhi(1.0), equilateral_triangle())

    def test_equilateral(self):
        """Test both bounds hold at the unit equilateral triangle with s = 1/2"""
        report = check_triangle_bounds(PowerPhi(0.5), equilateral_triangle())
        self.assertAlmostEqual(report.p, 1.5, delta=1e-14)
        self.assertAlmostEqual(report.lower, 0.0732233, delta=1e-7)
        self.assertAlmostEqual(report.upper, 3.0, delta=1e-14)
        self.assertTrue(report.passed)

    def test_upper_only(self):
        """Test the upper bound alone for a convex function"""
        report = check_triangle_bounds(PowerPhi(2.0), equilateral_triangle(), lower=False)
        self.assertTrue(report.upper_holds)
        self.assertEqual(report.lower, -math.inf)

    def test_corpus(self):
        """Test both bounds hold over a random corpus with a thin stratum"""
        rng = np.random.default_rng(33)
        summary = triangle_corpus(PowerPhi(0.5), 20000, rng, chunk=5000)
        self.assertTrue(summary.passed)
        self.assertEqual(summary.count, 20000)
        self.assertGreater(summary.min_lower_margin, 0.0)

    def test_thin_triangles(self):
        """Test the bounds persist as the short side shrinks to 1e-8"""
        phi = PhiZero()
        for c in (1e-2, 1e-4, 1e-6, 1e-8):
            tri = Triangle([0.0, 0.0], [0.5, 0.1], [c, 0.0])
            self.assertTrue(check_triangle_bounds(phi, tri).passed)

    def test_random_triangles_respect_min_side(self):
        """Test generated triangles never collapse"""
        vertices = random_triangles(np.random.default_rng(1), 1000, d=2, thin_share=0.5)
        self.assertEqual(vertices.shape, (1000, 3, 2))
        _, _, c = sorted_sides(vertices)
        self.assertTrue(np.all(c >= 1e-10))


class SymmetrizationTests(SimpleTestCase):
    """Test pair and triple parts of the truncated energy"""

    def test_two_atoms(self):
        """Test two atoms give (m1 m2**2 + m2 m1**2)/phi(l)**2 and no triple part"""
        phi, ell = PowerPhi(0.7), 0.4
        mu = AtomicMeasure([[0.0, 0.0], [ell, 0.0]], [1.0, 3.0])
        split = symmetrize_energy(KernelSpec(phi, 2), mu, 0.1)
        self.assertAlmostEqual(split.pair_term, (9.0 + 3.0) / phi(ell) ** 2, delta=1e-12)
        self.assertEqual(split.triple_term, 0.0)

    def test_single_atom(self):
        """Test a single atom gives all terms zero"""
        split = symmetrize_energy(KernelSpec(PhiZero(), 1), AtomicMeasure([[0.0]], [1.0]), 0.1)
        self.assertEqual((split.pair_term, split.triple_term, split.total), (0.0, 0.0, 0.0))

    def test_matches_direct_energy(self):
        """Test the split equals the direct energy for a 15-atom phi_0 cloud"""
        rng = np.random.default_rng(21)
        mu = random_measure(rng, 15, 2)
        kernel = KernelSpec(PhiZero(), 2)
        eps = 0.5 * mu.min_separation()
        direct = truncated_energy(kernel, mu, eps)
        self.assertAlmostEqual(symmetrize_energy(kernel, mu, eps).total / direct, 1.0, delta=1e-10)

    def test_truncation_must_not_merge(self):
        """Test eps at the minimal separation is refused"""
        mu = AtomicMeasure([[0.0], [1.0], [3.0]], [1.0, 1.0, 1.0])
        with self.assertRaises(HypothesisError):
            symmetrize_energy(KernelSpec(PowerPhi(0.5), 1), mu, 1.0)


class CurvatureSerializerTests(SimpleTestCase):
    """Test triangle and report serializers"""

    def test_triangle(self):
        """Test three vertices build a triangle"""
        serializer = TriangleSerializer(data={'vertices': [[0, 0], [1, 0], [0, 1]]})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.save().sides[0], math.sqrt(2.0))

    def test_repeated_vertex(self):
        """Test repeated vertices are reported"""
        serializer = TriangleSerializer(data={'vertices': [[0, 0], [0, 0], [0, 1]]})
        self.assertFalse(serializer.is_valid())
        self.assertIn('vertices', serializer.errors)

    def test_reports(self):
        """Test reports serialize with infinities as strings"""
        report = check_triangle_bounds(PowerPhi(2.0), equilateral_triangle(), lower=False)
        self.assertEqual(TriangleBoundReportSerializer(report).data['lower'], '-inf')
        summary = triangle_corpus(PowerPhi(2.0), 100, np.random.default_rng(0))
        data = TriangleCorpusSummarySerializer(summary).data
        self.assertIsNone(data['min_lower_margin'])
        self.assertEqual(data['count'], 100)
