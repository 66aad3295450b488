import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from apps.phi.functions import PhiZero, PowerPhi

from .generators import ball_grid, interval_grid, line_points, off_support_grid, thin_to_separation
from .measures import (
    AtomicMeasure,
    BallQuery,
    GrowthSampling,
    RadiusSampling,
    ball_mass,
    check_sigma_phi,
    rescale_to_sigma,
)
from .serializers import GrowthCertificateSerializer, MeasureSerializer, SetGeneratorSerializer
from .storage import dump_measure, load_measure, loads_measure


def brute_force_ratio(mu, phi, h, centers):
    """Largest ball mass over phi(r): the open ball at r = h and closed balls at each distance >= h."""
    worst = 0.0
    for x in centers:
        dist = np.linalg.norm(mu.points - x, axis=1)
        worst = max(worst, mu.masses[dist < h].sum() / phi(h))
        for r in dist[dist >= h]:
            worst = max(worst, mu.masses[dist <= r].sum() / phi(r))
    return worst


class AtomicMeasureTests(SimpleTestCase):
    """Test construction rules of atomic measures"""

    def test_rejects_nonpositive_mass(self):
        """Test zero and negative masses are refused"""
        with self.assertRaises(ValueError):
            AtomicMeasure([[0.0], [1.0]], [1.0, 0.0])
        with self.assertRaises(ValueError):
            AtomicMeasure([[0.0]], [-1.0])

    def test_rejects_repeated_point(self):
        """Test two atoms at one point are refused"""
        with self.assertRaises(ValueError):
            AtomicMeasure([[0.5, 0.5], [0.5, 0.5]], [1.0, 1.0])

    def test_arrays_are_read_only(self):
        """Test the stored arrays cannot be written"""
        mu = AtomicMeasure([[0.0], [1.0]], [1.0, 2.0])
        with self.assertRaises(ValueError):
            mu.masses[0] = 5.0

    def test_derived_quantities(self):
        """Test total mass, separation and diameter"""
        mu = AtomicMeasure([[0.0], [1.0], [3.0]], [1.0, 2.0, 3.0])
        self.assertEqual(mu.total_mass, 6.0)
        self.assertEqual(mu.min_separation(), 1.0)
        self.assertEqual(mu.diameter(), 3.0)
        self.assertEqual(len(mu.restrict([2, 0])), 2)
        self.assertEqual(len(mu.without_point([1.0])), 2)


class BallMassTests(SimpleTestCase):
    """Test mass of open and closed balls"""

    def test_atom_at_center(self):
        """Test a unit atom at the center of B(0, 0.5)"""
        mu = AtomicMeasure([[0.0]], [1.0])
        self.assertEqual(ball_mass(mu, BallQuery(0.0, 0.5)), 1.0)

    def test_open_ball_excludes_boundary(self):
        """Test an atom on the sphere of an open ball is not counted"""
        mu = AtomicMeasure([[0.0, 0.0]], [1.0])
        self.assertEqual(ball_mass(mu, BallQuery((1.0, 0.0), 1.0)), 0.0)
        self.assertEqual(ball_mass(mu, BallQuery((1.0, 0.0), 1.0, closed=True)), 1.0)

    def test_puncture_removes_own_atom(self):
        """Test the puncture drops the atom located at the center"""
        mu = AtomicMeasure([[0.0], [1.0]], [2.0, 3.0])
        self.assertEqual(ball_mass(mu, BallQuery(0.0, 1.5), puncture=[0.0]), 3.0)

    def test_empty_measure(self):
        """Test the empty measure has no mass anywhere"""
        self.assertEqual(ball_mass(AtomicMeasure.empty(2), BallQuery((0.0, 0.0), 1.0)), 0.0)

    def test_radius_must_be_positive(self):
        """Test a zero radius is refused"""
        with self.assertRaises(ValueError):
            BallQuery(0.0, 0.0)


class GrowthCheckTests(SimpleTestCase):
    """Test certification of the growth class at resolution h"""

    def test_single_atom_at_capacity(self):
        """Test an atom of mass phi(h) passes with ratio 1"""
        phi, h = PowerPhi(0.5), 0.01
        mu = AtomicMeasure([[0.0]], [phi(h)])
        certificate = check_sigma_phi(mu, phi, h)
        self.assertTrue(certificate.passed)
        self.assertAlmostEqual(certificate.worst_ratio, 1.0, places=14)
        self.assertEqual(certificate.worst_radius, h)

    def test_single_atom_twice_too_heavy(self):
        """Test an atom of mass 2 phi(h) fails with ratio 2"""
        phi, h = PowerPhi(0.5), 0.01
        mu = AtomicMeasure([[0.0]], [2 * phi(h)])
        certificate = check_sigma_phi(mu, phi, h)
        self.assertFalse(certificate.passed)
        self.assertAlmostEqual(certificate.worst_ratio, 2.0, places=14)

    def test_uniform_cloud_matches_brute_force(self):
        """Test the breakpoint sweep equals a brute-force sweep for phi_0"""
        phi, h = PhiZero(), 0.01
        points = interval_grid(100, 0.5, center=0.5)
        mu = AtomicMeasure(points, np.full(100, phi(0.01)))
        centers = points
        certificate = check_sigma_phi(mu, phi, h, GrowthSampling(centers=centers))
        expected = brute_force_ratio(mu, phi, h, centers)
        self.assertAlmostEqual(certificate.worst_ratio, expected, delta=1e-12 * expected)
        self.assertEqual(certificate.passed, expected <= 1.0 + 1e-12)

    def test_geometric_radii_never_exceed_breakpoints(self):
        """Test sampling fewer radii cannot find a worse ratio"""
        rng = np.random.default_rng(7)
        mu = AtomicMeasure(rng.uniform(size=(30, 2)), rng.uniform(0.5, 1.5, size=30))
        phi, h = PowerPhi(0.7), 0.05
        exact = check_sigma_phi(mu, phi, h)
        sampled = check_sigma_phi(mu, phi, h, GrowthSampling(radii=RadiusSampling.GEOMETRIC))
        self.assertLessEqual(sampled.worst_ratio, exact.worst_ratio * (1 + 1e-12))

    def test_rescaling_hits_ratio_one(self):
        """Test kappa = phi(h)/M for one atom and the rescaled measure certifies"""
        phi, h = PowerPhi(0.3), 0.1
        mu = AtomicMeasure([[0.0, 0.0]], [7.0])
        scaled, kappa = rescale_to_sigma(mu, phi, h)
        self.assertAlmostEqual(kappa, phi(h) / 7.0, delta=1e-15)
        self.assertTrue(check_sigma_phi(scaled, phi, h).passed)

    def test_measure_inside_class_has_kappa_at_least_one(self):
        """Test a measure already in the class is not scaled down"""
        phi, h = PowerPhi(0.5), 0.1
        mu = AtomicMeasure(line_points(5, 4.0), np.full(5, 0.5 * phi(h)))
        _, kappa = rescale_to_sigma(mu, phi, h)
        self.assertGreaterEqual(kappa, 1.0)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1), n=st.integers(min_value=1, max_value=12))
    def test_kappa_is_reciprocal_of_brute_force(self, seed, n):
        """Test kappa equals one over the brute-force worst ratio on random clouds"""
        rng = np.random.default_rng(seed)
        points = thin_to_separation(rng.uniform(size=(n, 1)), 1e-6)
        mu = AtomicMeasure(points, rng.uniform(0.5, 1.5, size=points.shape[0]))
        phi, h = PowerPhi(0.5), 0.02
        centers = points
        _, kappa = rescale_to_sigma(mu, phi, h, GrowthSampling(centers=centers))
        self.assertAlmostEqual(kappa * brute_force_ratio(mu, phi, h, centers), 1.0, delta=1e-12)

    def test_resolution_must_be_positive(self):
        """Test h = 0 is refused"""
        with self.assertRaises(ValueError):
            check_sigma_phi(AtomicMeasure([[0.0]], [1.0]), PowerPhi(0.5), 0.0)


class GeneratorTests(SimpleTestCase):
    """Test candidate point sets"""

    def test_ball_grid_stays_in_ball(self):
        """Test lattice points lie in the closed ball"""
        points = ball_grid(2, 1.0, 9)
        self.assertTrue(np.all(np.linalg.norm(points, axis=1) <= 1.0 + 1e-12))
        self.assertIn([0.0, 0.0], points.tolist())

    def test_off_support_grid_keeps_distance(self):
        """Test evaluation nodes stay h/2 away from the atoms"""
        points = np.array([[0.0], [1.0]])
        grid = off_support_grid(points, 0.2, n_per_axis=50)
        distances = np.abs(grid - points.T).min(axis=1)
        self.assertTrue(np.all(distances >= 0.1))

    def test_thinning_separates(self):
        """Test the thinned set is h separated and keeps the first point"""
        points = np.array([[0.0], [0.05], [0.2], [0.21], [1.0]])
        thinned = thin_to_separation(points, 0.1)
        self.assertEqual(thinned.ravel().tolist(), [0.0, 0.2, 1.0])


class MeasureStorageTests(SimpleTestCase):
    """Test text storage of measures"""

    def test_store_and_load(self):
        """Test a stored measure loads back bit for bit"""
        mu = AtomicMeasure([[0.1, 1 / 3], [2.0, -math.pi]], [1e-300, 0.7])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'mu.txt'
            dump_measure(mu, path)
            loaded = load_measure(path)
        np.testing.assert_array_equal(loaded.points, mu.points)
        np.testing.assert_array_equal(loaded.masses, mu.masses)

    def test_wrong_row_length_names_line(self):
        """Test a short row is reported with its line number"""
        with self.assertRaisesRegex(ValueError, 'Line 3'):
            loads_measure('1 2\n0.0 1.0\n0.5\n')

    def test_header_count_mismatch(self):
        """Test the header count must match the rows"""
        with self.assertRaises(ValueError):
            loads_measure('1 3\n0.0 1.0\n')


class MeasureSerializerTests(SimpleTestCase):
    """Test measure and generator serializers"""

    def test_valid_measure(self):
        """Test a valid payload creates the measure"""
        serializer = MeasureSerializer(data={'points': [[0.0], [1.0]], 'masses': [1.0, 2.0]})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        mu = serializer.save()
        self.assertEqual(mu.total_mass, 3.0)
        self.assertEqual(MeasureSerializer(mu).data['masses'], [1.0, 2.0])

    def test_mixed_dimensions(self):
        """Test rows of different lengths are refused"""
        serializer = MeasureSerializer(data={'points': [[0.0], [1.0, 2.0]], 'masses': [1.0, 2.0]})
        self.assertFalse(serializer.is_valid())
        self.assertIn('points', serializer.errors)

    def test_negative_mass(self):
        """Test a negative mass is reported on the masses field"""
        serializer = MeasureSerializer(data={'points': [[0.0]], 'masses': [-1.0]})
        self.assertFalse(serializer.is_valid())
        self.assertIn('masses', serializer.errors)

    def test_generator_builds_points(self):
        """Test a line generator yields n collinear points"""
        serializer = SetGeneratorSerializer(data={'kind': 'line', 'n': '5', 'd': '2'})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        points = serializer.build_points(np.random.default_rng(0))
        self.assertEqual(points.shape, (5, 2))
        self.assertTrue(np.all(points[:, 1] == 0.0))

    def test_file_generator_needs_path(self):
        """Test the file generator requires a path"""
        serializer = SetGeneratorSerializer(data={'kind': 'file'})
        self.assertFalse(serializer.is_valid())
        self.assertIn('path', serializer.errors)

    def test_certificate_representation(self):
        """Test a certificate serializes its worst center as a list"""
        mu = AtomicMeasure([[0.0, 0.0]], [1.0])
        data = GrowthCertificateSerializer(check_sigma_phi(mu, PowerPhi(0.5), 0.25)).data
        self.assertEqual(data['worst_center'], [0.0, 0.0])
        self.assertFalse(data['passed'])
