"""
Tests for the undeformed Hydrogen-like model.
Tests cover:
- Potential values and domain checks
- Quantum-number bookkeeping and the analytic spectrum
- Laguerre recurrence and the closed-form normalization
- Radial eigenfunctions: normalization, orthogonality, derivatives
"""
import math

import numpy as np
from django.test import SimpleTestCase

from isospectral.hydrogen import (
    QuantumNumbers,
    Spectrum,
    SpectrumSource,
    closed_form_constant,
    energy,
    hydrogen_spectrum,
    laguerre,
    potential_table,
    potential_v,
    radial_eigenfunction,
    radial_eigenfunctions,
)
from isospectral.numerics import DomainError, Grid, differentiate, integrate_table


class TestPotential(SimpleTestCase):
    """Test V_l(r) = l(l+1)/r^2 - 2/r."""

    def test_values(self):
        """Test a few closed-form values."""
        self.assertEqual(potential_v(1, 1.0), 0.0)
        self.assertEqual(potential_v(2, 2.0), 0.5)
        self.assertEqual(potential_v(0, 4.0), -0.5)

    def test_domain(self):
        """Test that r <= 0 and negative l are refused."""
        with self.assertRaises(DomainError):
            potential_v(1, 0.0)
        with self.assertRaises(DomainError):
            potential_v(-1, 1.0)

    def test_table_derivatives(self):
        """Test that the tabulated exact derivatives agree with stencil derivatives."""
        grid = Grid(2.0, 30.0, 3000)
        table = potential_table(2, grid)
        stencil = differentiate(table)
        self.assertLess(np.max(np.abs(stencil.d1 - table.d1)), 1e-6)


class TestSpectrum(SimpleTestCase):
    """Test the analytic levels."""

    def test_quantum_numbers(self):
        """Test n = l + k and the guards on k and n."""
        self.assertEqual(QuantumNumbers(l=2, k=3).n, 5)
        self.assertEqual(QuantumNumbers.from_n(4, 1).k, 3)
        with self.assertRaises(DomainError):
            QuantumNumbers(l=1, k=0)
        with self.assertRaises(DomainError):
            QuantumNumbers.from_n(2, 2)

    def test_energy(self):
        """Test E_lk = -1/(l+k)^2."""
        self.assertEqual(energy(1, 1), -0.25)
        self.assertEqual(energy(0, 3), -1.0 / 9.0)

    def test_textbook_tower(self):
        """Test the l = 1 tower -1/4, -1/9, -1/16."""
        spectrum = hydrogen_spectrum(1, 3)
        self.assertEqual(spectrum.energies, [-0.25, -1.0 / 9.0, -1.0 / 16.0])
        self.assertEqual(spectrum.labels, ['E(1,1)', 'E(1,2)', 'E(1,3)'])
        self.assertEqual(spectrum.source, SpectrumSource.ANALYTIC)

    def test_empty_request(self):
        """Test that k_max must be positive."""
        with self.assertRaises(DomainError):
            hydrogen_spectrum(1, 0)

    def test_spectrum_ordering(self):
        """Test that spectra must be strictly increasing and analytic ones bound."""
        with self.assertRaises(DomainError):
            Spectrum(entries=[('a', -0.1), ('b', -0.2)])
        with self.assertRaises(DomainError):
            Spectrum(entries=[('a', -0.1), ('b', 0.5)], source=SpectrumSource.ANALYTIC)
        Spectrum(entries=[('a', -0.1), ('b', 0.5)], source=SpectrumSource.NUMERIC)

    def test_to_dict(self):
        """Test the report form of a spectrum."""
        data = hydrogen_spectrum(2, 1).to_dict()
        self.assertEqual(data['source'], 'analytic')
        self.assertEqual(data['levels'], [{'label': 'E(2,1)', 'energy': -1.0 / 9.0}])


class TestLaguerre(SimpleTestCase):
    """Test the associated Laguerre recurrence."""

    def test_known_value(self):
        """Test L_2^3(1) = 5.5."""
        self.assertAlmostEqual(laguerre(2, 3, 1.0), 5.5, places=14)

    def test_low_degrees(self):
        """Test L_0 = 1 and L_1^a(x) = 1 + a - x."""
        x = np.array([0.0, 0.5, 3.0])
        np.testing.assert_allclose(laguerre(0, 2, x), 1.0)
        np.testing.assert_allclose(laguerre(1, 2, x), 3.0 - x)

    def test_negative_degree(self):
        """Test that negative degrees are refused."""
        with self.assertRaises(DomainError):
            laguerre(-1, 0, 1.0)


class TestEigenfunctions(SimpleTestCase):
    """Test the normalized radial eigenfunctions."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = Grid(1e-6, 150.0, 15000)

    def test_closed_form_constant_ground_state(self):
        """Test that psi_10 = 2 r e^{-r}."""
        self.assertAlmostEqual(closed_form_constant(1, 0), 2.0, places=14)
        psi = radial_eigenfunction(1, 0, self.grid)
        r = self.grid.nodes
        self.assertLess(np.max(np.abs(psi.values - 2 * r * np.exp(-r))), 1e-7)

    def test_unit_norm_and_sign(self):
        """Test unit norm on the grid and positivity near the origin."""
        for n in (2, 3, 4):
            psi = radial_eigenfunction(n, 1, self.grid)
            self.assertAlmostEqual(psi.norm(), 1.0, places=12)
            self.assertGreater(psi.values[100], 0.0)

    def test_orthogonality(self):
        """Test that states of one l are orthogonal."""
        states = radial_eigenfunctions(1, range(2, 6), self.grid)
        for i, left in enumerate(states):
            for right in states[i + 1:]:
                self.assertLess(abs(integrate_table(left.values * right.values, self.grid)), 1e-8)

    def test_exact_slope(self):
        """Test the closed-form derivative against the stencil derivative."""
        psi = radial_eigenfunction(3, 1, self.grid)
        stencil = differentiate(psi)
        self.assertLess(np.max(np.abs(stencil.d1 - psi.d1)), 1e-6)

    def test_requires_n_above_l(self):
        """Test that n <= l is refused."""
        with self.assertRaises(DomainError):
            radial_eigenfunction(2, 2, self.grid)

    def test_second_derivative_is_eigen_relation(self):
        """Test that d2 is (V - E) psi."""
        psi = radial_eigenfunction(4, 2, self.grid)
        expected = (potential_v(2, self.grid.nodes) + 1.0 / 16.0) * psi.values
        np.testing.assert_allclose(psi.d2, expected, atol=1e-14)
        self.assertTrue(math.isclose(psi.norm(), 1.0, rel_tol=1e-12))
