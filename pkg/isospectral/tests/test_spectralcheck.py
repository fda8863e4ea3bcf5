"""
Tests for the independent spectral checks.
Tests cover:
- EigenProblem validation
- Finite-difference and shooting eigensolvers on known spectra
- Test bumps and the intertwining residual
- Gram matrices and proportionality fits
- CheckResult, VerificationReport and the spectrum comparisons
"""
import math

import numpy as np
from django.test import SimpleTestCase

from isospectral.families import OperatorA, apply_A, v_tilde_two_param
from isospectral.hydrogen import Spectrum, SpectrumSource, hydrogen_spectrum, potential_table, radial_eigenfunction
from isospectral.numerics import DomainError, FunctionTable, Grid, GridScheme, differentiate
from isospectral.seeds import FamilyParams, GammaVariant, build_seed_pair
from isospectral.spectralcheck import (
    BracketFailure,
    CheckResult,
    EigenProblem,
    Method,
    VerificationReport,
    absent_level_check,
    bump_functions,
    compare_spectra,
    eigensolve_fd,
    eigensolve_shooting,
    eigenvectors_fd,
    fit_proportionality,
    gaussian_bump,
    gram_matrix,
    intertwining_residual,
    solve,
)


def flat_well(n_points=3001):
    """V = 0 between Dirichlet walls a distance pi apart."""
    grid = Grid(1e-8, math.pi + 1e-8, n_points, GridScheme.UNIFORM)
    return FunctionTable(grid=grid, values=np.zeros(n_points), label='well')


def numeric(energies):
    return Spectrum(entries=[(f'E[{i}]', e) for i, e in enumerate(energies)], source=SpectrumSource.NUMERIC)


class TestEigenProblem(SimpleTestCase):
    """Test problem validation."""

    def test_level_count(self):
        """Test that n_levels must lie in 1..12."""
        with self.assertRaises(DomainError):
            EigenProblem(flat_well(), n_levels=0)
        with self.assertRaises(DomainError):
            EigenProblem(flat_well(), n_levels=13)

    def test_potential_must_be_finite(self):
        """Test that a potential with a NaN is refused."""
        well = flat_well()
        values = well.values.copy()
        values[10] = math.nan
        with self.assertRaises(DomainError):
            EigenProblem(FunctionTable(grid=well.grid, values=values))

    def test_effective_l(self):
        """Test that the centrifugal index is read off the first node."""
        grid = Grid(1e-4, 60.0, 6000, GridScheme.UNIFORM)
        problem = EigenProblem(potential_table(2, grid), n_levels=2)
        self.assertAlmostEqual(problem.effective_l, 2.0, places=3)
        self.assertEqual(problem.method, Method.FD)


class TestEigensolvers(SimpleTestCase):
    """Test both eigensolvers on known spectra."""

    def test_fd_flat_well(self):
        """Test the levels 1, 4, 9 of the flat well."""
        spectrum = eigensolve_fd(EigenProblem(flat_well(), n_levels=3))
        np.testing.assert_allclose(spectrum.energies, [1.0, 4.0, 9.0], atol=1e-3)
        self.assertEqual(spectrum.source, SpectrumSource.NUMERIC)

    def test_richardson_improves_levels(self):
        """Test that extrapolation reduces the flat-well error."""
        problem = EigenProblem(flat_well(1001), n_levels=3)
        plain = np.abs(np.array(eigensolve_fd(problem).energies) - [1.0, 4.0, 9.0])
        refined = np.abs(np.array(eigensolve_fd(problem, richardson=True).energies) - [1.0, 4.0, 9.0])
        self.assertTrue(np.all(refined < plain))
        self.assertTrue(eigensolve_fd(problem, richardson=True).notes['richardson'])

    def test_fd_hydrogen(self):
        """Test -1/4, -1/9, -1/16 for l = 1."""
        grid = Grid(1e-4, 120.0, 12000, GridScheme.UNIFORM)
        spectrum = solve(EigenProblem(potential_table(1, grid), n_levels=3))
        np.testing.assert_allclose(spectrum.energies, hydrogen_spectrum(1, 3).energies, atol=2e-4)

    def test_shooting_hydrogen(self):
        """Test Numerov shooting for l = 1 on a logarithmic grid."""
        grid = Grid(1e-4, 120.0, 8000, GridScheme.LOG)
        problem = EigenProblem(potential_table(1, grid), n_levels=3, method=Method.SHOOTING)
        spectrum = eigensolve_shooting(problem)
        np.testing.assert_allclose(spectrum.energies, hydrogen_spectrum(1, 3).energies, atol=2e-4)
        self.assertEqual(spectrum.notes['method'], Method.SHOOTING.value)

    def test_shooting_needs_enough_levels(self):
        """Test that asking for more bound levels than the box holds raises BracketFailure."""
        grid = Grid(1e-4, 20.0, 2000, GridScheme.LOG)
        with self.assertRaises(BracketFailure):
            eigensolve_shooting(EigenProblem(potential_table(1, grid), n_levels=12))

    def test_fd_eigenvectors(self):
        """Test that the ground vector of V_1 is psi_21."""
        grid = Grid(1e-4, 120.0, 12000, GridScheme.UNIFORM)
        energies, vectors = eigenvectors_fd(EigenProblem(potential_table(1, grid), n_levels=2))
        self.assertEqual(len(vectors), 2)
        self.assertAlmostEqual(energies[0], -0.25, delta=2e-4)
        exact = radial_eigenfunction(2, 1, vectors[0].grid)
        overlap = abs(gram_matrix([vectors[0], exact])[0, 1])
        self.assertLess(1.0 - overlap, 1e-4)


class TestOperatorResiduals(SimpleTestCase):
    """Test the bump set and the intertwining residual."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = Grid.uniform(0.5, 20.0, 0.002)
        cls.bumps = bump_functions(cls.grid) + [gaussian_bump(cls.grid, center=9.0, width=0.7)]

    def test_bump_support_inside_grid(self):
        """Test that a bump reaching past r_max is refused."""
        with self.assertRaises(DomainError):
            bump_functions(self.grid, starts=(18.0,))

    def test_bump_derivatives(self):
        """Test the analytic bump slopes against the stencil."""
        for bump in self.bumps:
            stencil = differentiate(FunctionTable(grid=self.grid, values=bump.table.values)).d1
            scale = float(np.max(np.abs(bump.table.d1)))
            self.assertLess(float(np.max(np.abs(stencil - bump.table.d1))) / scale, 1e-6)

    def test_bump_peak_and_curvature(self):
        """Test a unit peak at mid-support and analytic second derivatives that match the stencil."""
        for bump in self.bumps[:-1]:
            self.assertLessEqual(float(np.max(bump.table.values)), 1.0 + 1e-12)
            self.assertGreater(float(np.max(bump.table.values)), 0.999)
        far = bump_functions(self.grid, starts=(12.0,))[0]
        self.assertAlmostEqual(far.table.values[self.grid.index_at(14.0)], 1.0, delta=1e-4)
        for bump in self.bumps:
            stencil = differentiate(FunctionTable(grid=self.grid, values=bump.table.values), order=2).d2
            scale = float(np.max(np.abs(bump.table.d2)))
            self.assertLess(float(np.max(np.abs(stencil - bump.table.d2))) / scale, 1e-6)

    def test_identity_intertwines_a_potential_with_itself(self):
        """Test that the identity operator leaves a near-zero residual."""
        base = potential_table(3, self.grid)
        self.assertLess(intertwining_residual(base, base, lambda chi: chi, self.bumps), 1e-6)

    def test_A_intertwines(self):
        """Test H~ A = A H_l for the consistent gamma and its failure for the printed one."""
        params = FamilyParams(l=3, nu1=-1.0, nu2=-1.0)
        seeds = build_seed_pair(params, self.grid, verify_branches=False)
        deformed = v_tilde_two_param(params, self.grid, seeds=seeds).table
        base = potential_table(3, self.grid)
        consistent = OperatorA.from_seeds(seeds)
        printed = OperatorA.from_seeds(seeds, GammaVariant.PRINTED)
        self.assertLess(intertwining_residual(deformed, base, lambda chi: apply_A(consistent, chi), self.bumps), 1e-6)
        self.assertGreater(intertwining_residual(deformed, base, lambda chi: apply_A(printed, chi), self.bumps), 1e-6)


class TestOverlaps(SimpleTestCase):
    """Test Gram matrices and proportionality fits."""

    def test_gram_needs_one_grid(self):
        """Test that states on different grids are refused."""
        first = radial_eigenfunction(2, 1, Grid(1e-6, 60.0, 6000))
        second = radial_eigenfunction(3, 1, Grid(1e-6, 80.0, 6000))
        with self.assertRaises(DomainError):
            gram_matrix([first, second])
        self.assertEqual(gram_matrix([]).shape, (0, 0))

    def test_proportionality(self):
        """Test kappa and the misfit of an exact multiple."""
        psi = radial_eigenfunction(2, 1, Grid(1e-6, 60.0, 6000))
        kappa, misfit = fit_proportionality(psi.scaled(-3.0), psi)
        self.assertAlmostEqual(kappa, -3.0, places=12)
        self.assertLess(misfit, 1e-14)
        with self.assertRaises(DomainError):
            fit_proportionality(psi, psi.scaled(0.0))


class TestReports(SimpleTestCase):
    """Test check results, reports and spectrum comparisons."""

    def test_check_result(self):
        """Test the below and above senses and non-finite values."""
        self.assertTrue(CheckResult('a', 1e-8, 1e-6).passed)
        self.assertFalse(CheckResult('a', 1e-5, 1e-6).passed)
        self.assertTrue(CheckResult('a', 2.0, 1.5, above=True).passed)
        self.assertFalse(CheckResult('a', math.nan, 1e-6).passed)
        self.assertFalse(CheckResult('a', math.inf, 1.0, above=True).passed)

    def test_report(self):
        """Test pass state, failed names and the dictionary form."""
        report = VerificationReport()
        report.add('good', 1e-9, 1e-6)
        self.assertTrue(report.passed)
        report.add('bad', 1.0, 1e-6)
        self.assertFalse(report.passed)
        self.assertEqual(report.failed_checks, ['bad'])
        report.add_spectrum('hydrogen', hydrogen_spectrum(1, 2))
        data = report.to_dict()
        self.assertFalse(data['pass'])
        self.assertEqual([check['name'] for check in data['checks']], ['good', 'bad'])
        self.assertEqual(data['spectra']['hydrogen']['source'], 'analytic')

    def test_compare_spectra(self):
        """Test level-wise errors and a missing level."""
        checks = compare_spectra(numeric([-0.25, -0.1111]), [-0.25, -1.0 / 9.0, -1.0 / 16.0], 2e-4, 'h')
        self.assertEqual([check.passed for check in checks], [True, True, False])
        self.assertEqual(checks[2].name, 'h.level[2]')

    def test_absent_level(self):
        """Test the distance to the nearest level."""
        spectrum = numeric([-0.25, -1.0 / 16.0])
        check = absent_level_check(spectrum, -1.0 / 9.0, 1e-3, 'absent')
        self.assertAlmostEqual(check.value, 1.0 / 9.0 - 1.0 / 16.0, places=15)
        self.assertTrue(check.passed)
        self.assertFalse(absent_level_check(numeric([-1.0 / 9.0 + 1e-5]), -1.0 / 9.0, 1e-3, 'absent').passed)
