import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from apps.measure.generators import random_measure
from apps.measure.measures import AtomicMeasure
from apps.metric.psi import compute_psi
from apps.phi.functions import PhiZero, PowerPhi

from .potentials import (
    WolffKind,
    WolffOptions,
    phi_zero_log_identity,
    potential_profile,
    quadrature_potential,
    step_profile,
    wolff_bessel_2d3,
    wolff_energy,
    wolff_phi,
    wolff_potential,
    wolff_s_metric,
)
from .serializers import WolffOptionsSerializer, WolffValueSerializer

UNPUNCTURED = WolffOptions(puncture=False)


class StepProfileTests(SimpleTestCase):
    """Test ball mass as a step function of the radius"""

    def test_equal_distances_are_merged(self):
        """Test atoms at one distance form a single jump"""
        mu = AtomicMeasure([[-1.0], [1.0], [2.0]], [1.0, 2.0, 4.0])
        ell, mass = step_profile(mu, [0.0])
        self.assertEqual(ell.tolist(), [1.0, 2.0])
        self.assertEqual(mass.tolist(), [3.0, 7.0])

    def test_puncture_drops_own_atom(self):
        """Test the atom at x is left out when punctured"""
        mu = AtomicMeasure([[0.0], [1.0]], [5.0, 1.0])
        ell, mass = step_profile(mu, [0.0], puncture=True)
        self.assertEqual(ell.tolist(), [1.0])
        self.assertEqual(mass.tolist(), [1.0])


class WolffPhiTests(SimpleTestCase):
    """Test the phi-Wolff potential"""

    def test_single_atom(self):
        """Test a unit atom at distance l gives 1/(2 phi(l)**2)"""
        phi = PhiZero()
        mu = AtomicMeasure([[0.3, 0.4]], [1.0])
        value = wolff_phi(mu, phi, [0.0, 0.0]).value
        self.assertAlmostEqual(value, 1.0 / (2.0 * phi(0.5) ** 2), delta=1e-14)
        quad = quadrature_potential(WolffKind.PHI, mu, [0.0, 0.0], UNPUNCTURED, phi=phi).value
        self.assertAlmostEqual(quad / value, 1.0, delta=1e-10)

    def test_own_atom_punctured(self):
        """Test the potential of an atom at x itself vanishes when punctured"""
        mu = AtomicMeasure([[0.0]], [1.0])
        self.assertEqual(wolff_phi(mu, PowerPhi(0.5), [0.0], puncture=True).value, 0.0)

    def test_own_atom_unpunctured_is_infinite(self):
        """Test an unpunctured atom at x without a floor gives infinity"""
        mu = AtomicMeasure([[0.0]], [1.0])
        self.assertEqual(wolff_phi(mu, PowerPhi(0.5), [0.0]).value, math.inf)
        floored = wolff_phi(mu, PowerPhi(0.5), [0.0], eps_floor=0.25).value
        self.assertAlmostEqual(floored, 0.5 / 0.25, delta=1e-14)

    def test_two_steps(self):
        """Test unit atoms at distances 1 and 2 with sqrt give 5/4"""
        mu = AtomicMeasure([[1.0], [-2.0]], [1.0, 1.0])
        value = wolff_phi(mu, PowerPhi(0.5), [0.0]).value
        self.assertAlmostEqual(value, 1.25, delta=1e-14)
        quad = quadrature_potential(WolffKind.PHI, mu, [0.0], UNPUNCTURED, phi=PowerPhi(0.5)).value
        self.assertAlmostEqual(quad, 1.25, delta=1e-10)

    def test_energy_of_two_equal_atoms(self):
        """Test the punctured energy of two atoms of mass m at distance l is m**3/phi(l)**2"""
        phi, m, ell = PhiZero(), 0.3, 0.2
        mu = AtomicMeasure([[0.0], [ell]], [m, m])
        energy = wolff_energy(mu, WolffKind.PHI, phi=phi)
        self.assertAlmostEqual(energy, m ** 3 / phi(ell) ** 2, delta=1e-14 * energy)

    def test_energy_of_subset(self):
        """Test the energy of a one-atom subset is zero"""
        mu = AtomicMeasure([[0.0], [1.0]], [1.0, 1.0])
        self.assertEqual(wolff_energy(mu, WolffKind.PHI, q=[1], phi=PowerPhi(0.5)), 0.0)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_closed_form_matches_quadrature(self, seed):
        """Test the closed form agrees with adaptive quadrature on random clouds"""
        rng = np.random.default_rng(seed)
        mu = random_measure(rng, int(rng.integers(1, 8)), 2)
        x = rng.uniform(size=2)
        phi = PhiZero()
        closed = wolff_phi(mu, phi, x).value
        quad = quadrature_potential(WolffKind.PHI, mu, x, UNPUNCTURED, phi=phi).value
        self.assertAlmostEqual(quad / closed, 1.0, delta=1e-8)


class WolffMetricTests(SimpleTestCase):
    """Test the s-Wolff potential in the induced metric"""

    def test_single_atom(self):
        """Test a unit atom gives 1/(2s dist**(2s))"""
        s = 0.5
        psi = compute_psi(PowerPhi(s), 4.0, 1024)
        mu = AtomicMeasure([[0.5]], [1.0])
        value = wolff_s_metric(mu, psi, s, [0.0]).value
        self.assertAlmostEqual(value, 1.0 / (2 * s * 0.5 ** (2 * s)), delta=1e-12)

    def test_empty_measure(self):
        """Test the empty measure has zero potential"""
        psi = compute_psi(PowerPhi(0.5), 1.0, 16)
        self.assertEqual(wolff_s_metric(AtomicMeasure.empty(1), psi, 0.5, [0.0]).value, 0.0)

    def test_power_change_of_variables(self):
        """Test W_phi = s W_s for t**s on random inputs"""
        rng = np.random.default_rng(5)
        for s in (0.3, 0.7):
            phi = PowerPhi(s)
            psi = compute_psi(phi, 4.0, 4096)
            for _ in range(20):
                mu = random_measure(rng, 6, 2)
                x = rng.uniform(size=2)
                w_phi = wolff_phi(mu, phi, x).value
                w_s = wolff_s_metric(mu, psi, s, x).value
                self.assertAlmostEqual(w_phi / (s * w_s), 1.0, delta=1e-10)

    def test_dispatch_uses_table_exponent(self):
        """Test wolff_potential reads s from the psi table"""
        phi = PowerPhi(0.7)
        psi = compute_psi(phi, 4.0, 1024)
        mu = AtomicMeasure([[0.25, 0.0], [0.0, 0.5]], [1.0, 2.0])
        expected = wolff_s_metric(mu, psi, 0.7, [0.0, 0.0]).value
        value = wolff_potential(WolffKind.S_METRIC, mu, [0.0, 0.0], psi=psi).value
        self.assertEqual(value, expected)
        quad = quadrature_potential(WolffKind.S_METRIC, mu, [0.0, 0.0], UNPUNCTURED, psi=psi).value
        self.assertAlmostEqual(quad / value, 1.0, delta=1e-8)

    def test_profile_rows(self):
        """Test profile rows carry the coordinates and the dispatched value"""
        phi = PowerPhi(0.5)
        mu = AtomicMeasure([[0.3, 0.4]], [1.0])
        rows = potential_profile(WolffKind.PHI, mu, [[0.0, 0.0], [0.3, 0.0]], phi=phi)
        self.assertEqual(rows[0][:2], (0.0, 0.0))
        self.assertAlmostEqual(rows[0][2], 1.0, delta=1e-14)
        self.assertAlmostEqual(rows[1][2], 1.0 / (2.0 * 0.4), delta=1e-14)


class WolffBesselTests(SimpleTestCase):
    """Test the logarithmic Wolff potential on (0, 1]"""

    def test_single_log_segment(self):
        """Test a unit atom at distance 1/e gives 1"""
        mu = AtomicMeasure([[math.exp(-1.0)]], [1.0])
        self.assertAlmostEqual(wolff_bessel_2d3(mu, [0.0]).value, 1.0, delta=1e-15)

    def test_far_atoms(self):
        """Test atoms at distance >= 1 contribute nothing"""
        mu = AtomicMeasure([[1.0], [-3.0]], [1.0, 2.0])
        self.assertEqual(wolff_bessel_2d3(mu, [0.0]).value, 0.0)

    def test_matches_quadrature(self):
        """Test the closed form agrees with quadrature"""
        mu = AtomicMeasure([[0.1, 0.0], [0.0, 0.3], [0.5, 0.5]], [1.0, 0.5, 2.0])
        closed = wolff_bessel_2d3(mu, [0.0, 0.0]).value
        quad = quadrature_potential(WolffKind.BESSEL, mu, [0.0, 0.0], UNPUNCTURED).value
        self.assertAlmostEqual(quad / closed, 1.0, delta=1e-10)

    def test_phi_zero_matches_half_log_form(self):
        """Test phi_0 segments below e**-1.5 equal half the logarithmic segments"""
        rng = np.random.default_rng(2)
        mu = random_measure(rng, 8, 2).dilated(0.1)
        phi_side, log_side = phi_zero_log_identity(mu, PhiZero(), mu.points[0])
        self.assertEqual(phi_side.shape, log_side.shape)
        np.testing.assert_allclose(phi_side, log_side, rtol=1e-12, atol=1e-14)


class WolffSerializerTests(SimpleTestCase):
    """Test options and value serializers"""

    def test_defaults(self):
        """Test the options default to a punctured potential without floor"""
        serializer = WolffOptionsSerializer(data={})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.save(), WolffOptions())

    def test_negative_floor(self):
        """Test a negative floor is refused"""
        serializer = WolffOptionsSerializer(data={'eps_floor': '-1'})
        self.assertFalse(serializer.is_valid())
        self.assertIn('eps_floor', serializer.errors)

    def test_infinite_value(self):
        """Test an infinite potential serializes as 'inf'"""
        mu = AtomicMeasure([[0.0]], [1.0])
        data = WolffValueSerializer(wolff_phi(mu, PowerPhi(0.5), [0.0])).data
        self.assertEqual(data['value'], 'inf')
        self.assertFalse(data['punctured'])
