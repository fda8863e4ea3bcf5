"""
Tests for the seed functions.
Tests cover:
- FamilyParams domain checks and derived constants
- g1, the pole-free g2 and its two evaluation branches
- beta, alpha, alpha' and the two gamma variants
- Singular radii of the intermediate regime and the nu1, nu2 < 1 domain guard
- Seed residuals and the beta identity on a tabulated seed pair
"""
import math

import numpy as np
from django.test import SimpleTestCase

from isospectral.numerics import DomainError, Grid, scalar_derivative
from isospectral.seeds import (
    FamilyKind,
    FamilyParams,
    GammaVariant,
    SingularFamily,
    alpha_eval,
    alpha_prime,
    beta_eval,
    beta_identity_residual,
    beta_prime,
    build_seed_pair,
    c_d_constants,
    g1_eval,
    g2_closed_form,
    g2_dual_path,
    g2_eval,
    g2_prime,
    g2_quadrature,
    gamma_coeff,
    scan_denominator,
    seed_residuals,
    wronskian_g,
)


class TestFamilyParams(SimpleTestCase):
    """Test parameter validation."""

    def test_two_param_domain(self):
        """Test that the two-parameter family needs nu1, nu2 < 1 and l >= 2."""
        with self.assertRaisesMessage(DomainError, 'intermediate'):
            FamilyParams(l=3, nu2=1.5)
        with self.assertRaises(DomainError):
            FamilyParams(l=3, nu1=1.0)
        with self.assertRaises(DomainError):
            FamilyParams(l=1)
        with self.assertRaises(DomainError):
            FamilyParams(l=3, nu1=math.nan)

    def test_unchecked_parameters(self):
        """Test that checked=False admits nu1 = 1.5 but still enforces l >= 2."""
        params = FamilyParams(l=3, nu1=1.5, nu2=-1.0, checked=False)
        self.assertEqual(params.nu1, 1.5)
        with self.assertRaises(DomainError):
            FamilyParams(l=3, nu1=1.5, nu2=-1.0)
        with self.assertRaises(DomainError):
            FamilyParams(l=1, nu1=1.5, checked=False)

    def test_intermediate_domain(self):
        """Test that the intermediate family needs nu2 > 1."""
        FamilyParams(l=3, nu2=1.5, family=FamilyKind.INTERMEDIATE)
        with self.assertRaises(DomainError):
            FamilyParams(l=3, nu2=0.5, family=FamilyKind.INTERMEDIATE)

    def test_derived_constants(self):
        """Test a, L, s and the two seed energies at l = 3."""
        params = FamilyParams(l=3)
        self.assertEqual((params.a, params.big_l, params.s), (2, 6, 5))
        self.assertEqual(params.e1, -1.0 / 9.0)
        self.assertEqual(params.e2, -0.25)
        self.assertAlmostEqual(params.epsilon, -0.25 + 1.0 / 9.0, places=15)

    def test_c_d_constants(self):
        """Test c and d at l = 2."""
        c, d = c_d_constants(2)
        self.assertAlmostEqual(c, 9.0 / 64.0, places=15)
        self.assertAlmostEqual(d, 1.25, places=15)
        with self.assertRaises(DomainError):
            c_d_constants(1)


class TestSeedFunctions(SimpleTestCase):
    """Test g1 and g2."""

    def test_g1_known_value(self):
        """Test g1 at l = 2, nu1 = 0.5, r = 10."""
        params = FamilyParams(l=2, nu1=0.5)
        expected = 1 - 0.5 * (1 - math.exp(-10.0) * (1 + 10 + 50 + 1000 / 6 + 10000 / 24))
        self.assertAlmostEqual(g1_eval(params, 10.0), expected, places=13)
        self.assertAlmostEqual(g1_eval(params, 10.0), 0.514626, places=6)

    def test_g2_without_deformation(self):
        """Test g2 = e^{r/L} (1 - r/L) at nu2 = 0, across the pole."""
        params = FamilyParams(l=3)
        r = np.array([0.5, 6.0, 9.0])
        np.testing.assert_allclose(g2_closed_form(params, r), np.exp(r / 6) * (1 - r / 6), atol=1e-14)
        self.assertEqual(g2_eval(params, 6.0), 0.0)

    def test_closed_form_matches_quadrature(self):
        """Test the pole-free closed form against the integral below the pole."""
        params = FamilyParams(l=3, nu1=-1.0, nu2=-1.0)
        for r in (0.5, 2.5, 5.0):
            expected = g2_quadrature(params, r)
            self.assertLess(abs(g2_closed_form(params, r) - expected), 1e-9 * max(1.0, abs(expected)))

    def test_quadrature_branch_stops_before_pole(self):
        """Test that the integral representation is refused at and beyond r = l(l-1)."""
        with self.assertRaises(DomainError):
            g2_quadrature(FamilyParams(l=3, nu2=-1.0), 6.0)

    def test_continuation_beyond_pole(self):
        """Test the ODE branch of g2_eval beyond the pole against the closed form."""
        params = FamilyParams(l=3, nu2=-1.0)
        expected = g2_closed_form(params, 8.0)
        self.assertLess(abs(g2_eval(params, 8.0) - expected), 1e-6 * abs(expected))

    def test_dual_path_agrees(self):
        """Test that the two g2 branches agree on their overlap window."""
        comparison = g2_dual_path(FamilyParams(l=3, nu1=-1.0, nu2=-1.0))
        self.assertLess(comparison.disagreement, 1e-8)
        self.assertLess(comparison.continuation_deviation, 1e-6)
        self.assertEqual(set(comparison.to_dict()), {'window', 'disagreement', 'continuation_deviation'})

    def test_g2_prime_matches_numeric_slope(self):
        """Test the closed-form g2' against a central difference."""
        params = FamilyParams(l=2, nu2=-10.0)
        numeric = scalar_derivative(lambda x: g2_closed_form(params, x), 1.3)
        self.assertAlmostEqual(g2_prime(params, 1.3), numeric, places=7)

    def test_wronskian(self):
        """Test W(g1, g2) = g1' g2 - g1 g2'."""
        params = FamilyParams(l=3, nu1=-1.0, nu2=-1.0)
        r = 2.0
        g1_slope = scalar_derivative(lambda x: g1_eval(params, x), r)
        expected = g1_slope * g2_closed_form(params, r) - g1_eval(params, r) * g2_prime(params, r)
        self.assertLess(abs(wronskian_g(params, r) - expected), 1e-7 * abs(expected))


class TestBetaAlphaGamma(SimpleTestCase):
    """Test the coefficient functions of the intertwiner."""

    def test_undeformed_alpha_is_constant(self):
        """Test alpha = -(2l-1)/(l(l-1)) and alpha' = 0 at nu1 = nu2 = 0."""
        params = FamilyParams(l=3)
        r = np.linspace(0.1, 40.0, 50)
        np.testing.assert_allclose(alpha_eval(params, r), -5.0 / 6.0, rtol=1e-14)
        self.assertEqual(float(np.max(np.abs(alpha_prime(params, r)))), 0.0)
        np.testing.assert_allclose(beta_eval(params, r), 5.0 / r - 5.0 / 6.0, rtol=1e-12, atol=1e-14)

    def test_alpha_asymptote(self):
        """Test that alpha tends to (1-2l)/(l(l-1)) for a deformed family."""
        params = FamilyParams(l=3, nu1=-1.0, nu2=-1.0)
        self.assertAlmostEqual(alpha_eval(params, 200.0), -5.0 / 6.0, places=10)

    def test_alpha_prime_matches_numeric_slope(self):
        """Test the closed-form alpha' against a central difference."""
        params = FamilyParams(l=3, nu1=-10.0, nu2=-10.0)
        for r in (0.7, 3.0, 9.0):
            numeric = scalar_derivative(lambda x: alpha_eval(params, x), r)
            self.assertAlmostEqual(alpha_prime(params, r), numeric, places=7)

    def test_beta_prime(self):
        """Test that beta' = alpha' - (2l-1)/r^2."""
        params = FamilyParams(l=2, nu1=-1.0, nu2=-1.0)
        self.assertAlmostEqual(beta_prime(params, 1.5), alpha_prime(params, 1.5) - 3.0 / 2.25, places=12)

    def test_gamma_variants_differ_by_three_halves_over_r(self):
        """Test that the printed gamma differs from the consistent one by -3/(2r)."""
        params = FamilyParams(l=3, nu1=-1.0, nu2=-1.0)
        r = np.array([0.5, 2.0, 7.0])
        difference = gamma_coeff(params, r, GammaVariant.PRINTED) - gamma_coeff(params, r)
        np.testing.assert_allclose(difference, -1.5 / r, rtol=1e-10)

    def test_requires_positive_radius(self):
        """Test that beta is refused at r = 0."""
        with self.assertRaises(DomainError):
            beta_eval(FamilyParams(l=3), 0.0)


class TestSeedPair(SimpleTestCase):
    """Test tabulated seed pairs."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = Grid(1e-6, 300.0, 30000)
        cls.params = FamilyParams(l=3, nu1=-1.0, nu2=-1.0)
        cls.seeds = build_seed_pair(cls.params, cls.grid)
        cls.star_params = FamilyParams(l=3, nu2=2.0, family=FamilyKind.INTERMEDIATE)

    def test_admissible_family_is_regular(self):
        """Test that no singular radius is found for nu1, nu2 < 1."""
        self.assertEqual(scan_denominator(self.params, self.grid), [])
        self.assertEqual(self.seeds.singular_radii, [])
        self.assertIsNotNone(self.seeds.branches)

    def test_seed_residuals(self):
        """Test that phi1 and phi2 solve H_l at E1 and E2."""
        residuals = seed_residuals(self.seeds)
        self.assertLess(residuals['phi1'], 1e-6)
        self.assertLess(residuals['phi2'], 1e-6)

    def test_seed_residuals_next_to_the_origin(self):
        """Test that phi2 solves H_l at E2 down to the first interior node for several families."""
        for nu1, nu2 in [(0.5, 0.5), (-10.0, -10.0), (-0.1, -20.0)]:
            seeds = build_seed_pair(FamilyParams(l=3, nu1=nu1, nu2=nu2), self.grid, verify_branches=False)
            residuals = seed_residuals(seeds)
            self.assertLess(residuals['phi1'], 1e-6)
            self.assertLess(residuals['phi2'], 1e-6)
        seeds = build_seed_pair(FamilyParams(l=2, nu1=-1.0, nu2=-1.0), self.grid, verify_branches=False)
        self.assertLess(seed_residuals(seeds)['phi2'], 1e-6)

    def test_beta_identity(self):
        """Test that the corrected identity holds and the printed one does not."""
        identity = beta_identity_residual(self.seeds)
        self.assertLess(identity['corrected'], 1e-6)
        self.assertGreater(identity['printed'], 1e-3)

    def test_random_admissible_families_are_regular(self):
        """Test 200 random nu1, nu2 in (-20, 0.99) for l = 2 and l = 3 without a sign change of W(g1, g2)."""
        grid = Grid(1e-6, 300.0, 6000)
        rng = np.random.default_rng(7)
        for l in (2, 3):
            for nu1, nu2 in rng.uniform(-20.0, 0.99, size=(200, 2)):
                params = FamilyParams(l=l, nu1=nu1, nu2=nu2)
                self.assertEqual(scan_denominator(params, grid), [], msg=params.to_dict())

    def test_nu1_beyond_one_is_singular(self):
        """Test that nu1 = 1.5 gives a zero of W(g1, g2) and a SingularFamily from the seed pair."""
        params = FamilyParams(l=3, nu1=1.5, nu2=-1.0, checked=False)
        radii = scan_denominator(params, self.grid)
        self.assertTrue(radii)
        with self.assertRaises(SingularFamily) as caught:
            build_seed_pair(params, self.grid, verify_branches=False)
        self.assertAlmostEqual(caught.exception.radius, radii[0])

    def test_intermediate_regime_is_singular(self):
        """Test that nu2 > 1 raises unless singular radii are allowed."""
        with self.assertRaises(SingularFamily) as caught:
            build_seed_pair(self.star_params, self.grid, verify_branches=False)
        self.assertIsNotNone(caught.exception.radius)
        seeds = build_seed_pair(self.star_params, self.grid, allow_singular=True, verify_branches=False)
        self.assertTrue(seeds.singular_radii)
        mask = seeds.singular_mask(0.1)
        radius = seeds.singular_radii[0]
        self.assertFalse(mask[self.grid.index_at(radius)])
        self.assertTrue(mask[-1])

    def test_alpha_table_carries_derivative(self):
        """Test that the alpha table holds alpha' as its first derivative."""
        alpha = self.seeds.alpha
        index = self.grid.index_at(4.0)
        self.assertAlmostEqual(alpha.d1[index], alpha_prime(self.params, self.grid.nodes[index]), places=12)
