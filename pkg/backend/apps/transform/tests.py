import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from apps.core.exceptions import ConvergenceError
from apps.measure.generators import random_measure
from apps.measure.measures import AtomicMeasure
from apps.phi.functions import PhiZero, PowerPhi

from .operators import (
    KernelSpec,
    TruncationSchedule,
    apply_truncated,
    breakpoint_norm_profile,
    limit_transform,
    maximal_excess,
    maximal_transform,
    operator_norm,
    power_iteration,
    quadratic_form,
    truncated_energy,
    weighted_matrix,
)


class KernelTests(SimpleTestCase):
    """Test the vector kernel (y - x) / (|y - x| phi(|y - x|))"""

    def test_coincident_points_give_zero(self):
        """Test K(x, x) = 0 and K(x, y) - K(x', y) = 0 when x = x'"""
        kernel = KernelSpec(PhiZero(), 2)
        x, y = np.array([0.2, 0.1]), np.array([0.5, 0.5])
        np.testing.assert_array_equal(kernel.evaluate(x, x), np.zeros(2))
        np.testing.assert_array_equal(kernel.evaluate(x, y) - kernel.evaluate(x, y), np.zeros(2))

    def test_size(self):
        """Test |K(x, y)| = 1/phi(|x - y|)"""
        kernel = KernelSpec(PowerPhi(0.5), 2)
        value = kernel.evaluate([0.0, 0.0], [0.6, 0.8])
        self.assertAlmostEqual(np.linalg.norm(value), 1.0, delta=1e-15)
        np.testing.assert_allclose(value, [0.6, 0.8], rtol=1e-15)


class TruncatedTransformTests(SimpleTestCase):
    """Test R_eps f at evaluation points"""

    def test_single_atom_at_itself(self):
        """Test the transform at the only atom is zero"""
        mu = AtomicMeasure([[0.3, 0.3]], [2.0])
        kernel = KernelSpec(PowerPhi(0.5), 2)
        np.testing.assert_array_equal(apply_truncated(kernel, mu, 1.0, 0.01, mu.points), [[0.0, 0.0]])

    def test_symmetric_atoms_cancel(self):
        """Test two equal atoms symmetric about x cancel"""
        mu = AtomicMeasure([[-1.0, 0.5], [1.0, 0.5]], [1.0, 1.0])
        kernel = KernelSpec(PhiZero(), 2)
        np.testing.assert_array_equal(apply_truncated(kernel, mu, 1.0, 0.1, [[0.0, 0.5]]), [[0.0, 0.0]])

    def test_line_matches_hand_sum(self):
        """Test three atoms on the line with phi(t) = t against scalar summation"""
        rng = np.random.default_rng(4)
        points = rng.uniform(size=3)
        masses = rng.uniform(0.5, 1.5, size=3)
        f = rng.uniform(-1.0, 1.0, size=3)
        x = 2.0
        mu = AtomicMeasure(points.reshape(-1, 1), masses)
        value = apply_truncated(KernelSpec(PowerPhi(1.0), 1), mu, f, 1e-3, [[x]])[0, 0]
        expected = math.fsum(np.sign(y - x) / abs(y - x) * fy * m for y, fy, m in zip(points, f, masses))
        self.assertAlmostEqual(value, expected, delta=1e-14 * abs(expected))

    def test_truncation_drops_near_atoms(self):
        """Test atoms within eps are not seen"""
        mu = AtomicMeasure([[0.1], [2.0]], [1.0, 1.0])
        kernel = KernelSpec(PowerPhi(1.0), 1)
        value = apply_truncated(kernel, mu, 1.0, 0.5, [[0.0]])[0, 0]
        self.assertAlmostEqual(value, 0.5, delta=1e-15)

    def test_rejects_nonpositive_eps_and_nan(self):
        """Test eps <= 0 and non-finite f are refused"""
        mu = AtomicMeasure([[0.0]], [1.0])
        kernel = KernelSpec(PowerPhi(0.5), 1)
        with self.assertRaises(ValueError):
            apply_truncated(kernel, mu, 1.0, 0.0, [[1.0]])
        with self.assertRaises(ValueError):
            apply_truncated(kernel, mu, math.nan, 0.1, [[1.0]])

    def test_limit_transform_skips_own_atom(self):
        """Test the untruncated transform at an atom sees only the others"""
        mu = AtomicMeasure([[0.0], [1.0]], [3.0, 2.0])
        value = limit_transform(KernelSpec(PowerPhi(1.0), 1), mu, mu.points)
        np.testing.assert_allclose(value, [[2.0], [-3.0]], rtol=1e-15)

    def test_energy_of_two_atoms(self):
        """Test the truncated energy of two atoms is m1 m2**2 / phi**2 + m2 m1**2 / phi**2"""
        phi, ell = PowerPhi(0.5), 0.25
        mu = AtomicMeasure([[0.0], [ell]], [1.0, 2.0])
        energy = truncated_energy(KernelSpec(phi, 1), mu, 0.1)
        self.assertAlmostEqual(energy, (1.0 * 4.0 + 2.0 * 1.0) / phi(ell) ** 2, delta=1e-12)


class OperatorNormTests(SimpleTestCase):
    """Test spectral norm of R_eps on L^2(mu)"""

    def test_single_atom(self):
        """Test one atom gives the zero operator"""
        mu = AtomicMeasure([[0.0]], [1.0])
        self.assertEqual(operator_norm(KernelSpec(PowerPhi(0.5), 1), mu, 0.1), 0.0)

    def test_two_atoms(self):
        """Test two atoms give sqrt(m1 m2)/phi(l)"""
        phi, ell = PhiZero(), 0.3
        mu = AtomicMeasure([[0.0], [ell]], [1.0, 4.0])
        norm = operator_norm(KernelSpec(phi, 1), mu, 0.1)
        self.assertAlmostEqual(norm, 2.0 / phi(ell), delta=1e-9 * norm)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1), n=st.integers(min_value=2, max_value=15))
    def test_matches_dense_norm(self, seed, n):
        """Test power iteration matches the dense spectral norm"""
        rng = np.random.default_rng(seed)
        mu = random_measure(rng, n, 2)
        kernel = KernelSpec(PowerPhi(0.7), 2)
        eps = 0.5 * mu.min_separation()
        expected = np.linalg.norm(weighted_matrix(kernel, mu, eps), 2)
        self.assertAlmostEqual(operator_norm(kernel, mu, eps) / expected, 1.0, delta=1e-6)

    def test_iteration_budget(self):
        """Test exhausting the iteration budget raises ConvergenceError"""
        rng = np.random.default_rng(8)
        mu = random_measure(rng, 12, 2)
        kernel = KernelSpec(PowerPhi(0.5), 2)
        with self.assertRaises(ConvergenceError):
            operator_norm(kernel, mu, 0.5 * mu.min_separation(), tol=0.0, max_iter=3)

    def test_restart_leaves_smaller_eigenvalue(self):
        """Test a start orthogonal to the top eigenvector still finds the largest eigenvalue"""
        gram = np.diag([2.0, 1.0])
        self.assertAlmostEqual(power_iteration(gram, start=[0.0, 1.0]), 2.0, delta=1e-9)

    def test_restart_leaves_null_space(self):
        """Test a start in the null space is restarted from the seeded stream"""
        gram = np.diag([3.0, 1.0, 0.0])
        self.assertAlmostEqual(power_iteration(gram, start=[0.0, 0.0, 1.0]), 3.0, delta=1e-9)
        self.assertEqual(power_iteration(gram, start=[0.0, 0.0, 1.0]),
                         power_iteration(gram, start=[0.0, 0.0, 1.0]))

    def test_breakpoint_profile(self):
        """Test one norm per truncation regime, the last leaving one pair"""
        mu = AtomicMeasure([[0.0], [1.0], [3.0]], [1.0, 1.0, 1.0])
        profile = breakpoint_norm_profile(KernelSpec(PowerPhi(1.0), 1), mu)
        self.assertEqual([eps for eps, _ in profile], [0.5, 1.0, 2.0])
        self.assertAlmostEqual(profile[-1][1], 1.0 / 3.0, delta=1e-9)

    def test_schedule_validation(self):
        """Test truncations must be positive and increasing"""
        with self.assertRaises(ValueError):
            TruncationSchedule(np.array([0.2, 0.1]))
        self.assertEqual(TruncationSchedule.breakpoints([[0.0]]).truncations().size, 0)


class MaximalTransformTests(SimpleTestCase):
    """Test sup_eps |R_eps 1(x)|"""

    def test_single_atom(self):
        """Test m/phi(l) away from the atom and 0 at it"""
        phi = PowerPhi(0.5)
        mu = AtomicMeasure([[0.0, 0.0]], [3.0])
        values = maximal_transform(KernelSpec(phi, 2), mu, [[0.0, 0.0], [0.0, 0.25]])
        self.assertEqual(values[0], 0.0)
        self.assertAlmostEqual(values[1], 3.0 / phi(0.25), delta=1e-14)

    def test_matches_dense_eps_scan(self):
        """Test the exact supremum dominates and nearly equals a dense eps scan"""
        rng = np.random.default_rng(12)
        mu = random_measure(rng, 20, 2)
        kernel = KernelSpec(PhiZero(), 2)
        x = rng.uniform(size=(1, 2))
        exact = maximal_transform(kernel, mu, x)[0]
        dist = np.linalg.norm(mu.points - x, axis=1)
        scan = max(
            np.linalg.norm(apply_truncated(kernel, mu, 1.0, eps, x))
            for eps in np.linspace(1e-6, dist.max(), 10000)
        )
        self.assertLessEqual(scan, exact * (1 + 1e-12))
        cuts = np.sort(dist)[:-1] * (1 + 1e-12)
        at_breakpoints = max(np.linalg.norm(apply_truncated(kernel, mu, 1.0, eps, x)) for eps in cuts)
        full = np.linalg.norm(apply_truncated(kernel, mu, 1.0, 1e-9, x))
        self.assertAlmostEqual(max(at_breakpoints, full), exact, delta=1e-10 * exact)

    def test_excess_report(self):
        """Test the maximal transform dominates the off-support surrogate"""
        rng = np.random.default_rng(6)
        report = maximal_excess(KernelSpec(PowerPhi(0.5), 2), random_measure(rng, 10, 2), 0.05, 8)
        self.assertGreaterEqual(report.excess, 0.0)
        self.assertGreater(report.eval_count, 10)


class QuadraticFormTests(SimpleTestCase):
    """Test <R_eps chi_Q, chi_Q> vanishes by antisymmetry"""

    def test_single_atom(self):
        """Test a one-atom Q gives the zero vector"""
        mu = AtomicMeasure([[0.0], [1.0]], [1.0, 1.0])
        np.testing.assert_array_equal(quadratic_form(KernelSpec(PowerPhi(0.5), 1), mu, [0], 0.1), [0.0])

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_vanishes_on_random_measures(self, seed):
        """Test the form is zero to rounding for random mu and Q = all atoms"""
        rng = np.random.default_rng(seed)
        mu = random_measure(rng, 15, 3)
        kernel = KernelSpec(PhiZero(), 3)
        form = quadratic_form(kernel, mu, range(len(mu)), 0.0)
        dist = mu.pairwise_distances()
        off = ~np.eye(len(mu), dtype=bool)
        scale = (np.outer(mu.masses, mu.masses)[off] / PhiZero().evaluate(dist[off])).sum()
        self.assertLessEqual(np.linalg.norm(form), 1e-12 * scale)
