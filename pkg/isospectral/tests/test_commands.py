"""
Tests for the management commands.
Tests cover:
- Potential tables and their metadata
- Exit codes for domain errors, singular families and failed checks
- Output paths under ISOHYDRA['OUTPUT_DIR']
- State tables, the spectrum comparison and the verify report
"""
import io
import json
import tempfile
from pathlib import Path
from unittest.mock import patch

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from isospectral.cli import EXIT_DOMAIN, EXIT_FAILED, EXIT_SINGULAR, Family, RunConfig, parse_tolerances
from isospectral.export import read_csv
from isospectral.numerics import DomainError
from isospectral.spectralcheck import VerificationReport


def run(name, **options):
    out = io.StringIO()
    call_command(name, stdout=out, stderr=io.StringIO(), **options)
    return out.getvalue()


class TestRunConfig(SimpleTestCase):
    """Test parse-time validation."""

    def test_tolerance_overrides(self):
        """Test KEY=VAL parsing."""
        self.assertEqual(parse_tolerances(['residual_tol=1e-8']), {'residual_tol': 1e-8})
        with self.assertRaises(DomainError):
            parse_tolerances(['residual_tol'])
        with self.assertRaises(DomainError):
            parse_tolerances(['residual_tol=small'])

    def test_family_rules(self):
        """Test the l floor per family and the required gamma."""
        with self.assertRaises(DomainError):
            RunConfig(family=Family.TWO_PARAM, l=1)
        with self.assertRaises(DomainError):
            RunConfig(family=Family.FERNANDEZ, l=2)
        with self.assertRaises(DomainError):
            RunConfig(family=Family.INTERMEDIATE, l=3, nu1=0.5, nu2=2.0)
        with self.assertRaises(DomainError):
            RunConfig(levels=13)
        RunConfig(family=Family.HYDROGEN, l=0)

    def test_params_dict(self):
        """Test the parameters recorded in output metadata."""
        config = RunConfig(family=Family.FERNANDEZ, l=2, gamma=-5.0)
        self.assertEqual(config.params_dict(), {'family': 'fernandez', 'l': 2, 'gamma': -5.0})


class TestPotentialCommand(SimpleTestCase):
    """Test `isohydra potential`."""

    def test_zero_parameters(self):
        """Test that nu1 = nu2 = 0 tabulates a zero deformation."""
        metadata, columns = read_csv(io.StringIO(run('potential', family='two-param', l=3, nu1=0.0, nu2=0.0)))
        self.assertEqual(set(columns), {'r', 'V_base', 'V_deformed', 'delta'})
        self.assertEqual(max(abs(value) for value in columns['delta']), 0.0)
        self.assertEqual(metadata['command'], 'potential')
        self.assertEqual(metadata['params']['nu1'], 0.0)
        self.assertIn('residual_tol', metadata['tolerances'])

    def test_json_output(self):
        """Test the JSON document form."""
        document = json.loads(run('potential', family='fernandez', l=2, gamma=-5.0, format='json'))
        self.assertIn('emitted_at', document['metadata'])
        self.assertEqual(len(document['columns']['r']), document['metadata']['grid']['n_points'])

    def test_domain_error_exit_code(self):
        """Test that nu2 >= 1 for the two-parameter family exits with 2."""
        with self.assertRaises(CommandError) as caught:
            run('potential', family='two-param', l=3, nu2=1.5)
        self.assertEqual(caught.exception.returncode, EXIT_DOMAIN)
        self.assertIn('intermediate', str(caught.exception))

    def test_unknown_tolerance_exit_code(self):
        """Test that an unknown --tol key exits with 2."""
        with self.assertRaises(CommandError) as caught:
            run('potential', tol=['bogus=1'])
        self.assertEqual(caught.exception.returncode, EXIT_DOMAIN)

    def test_singular_exit_code(self):
        """Test that gamma inside the integral's range exits with 3."""
        with self.assertRaises(CommandError) as caught:
            run('potential', family='fernandez', l=2, gamma=0.25)
        self.assertEqual(caught.exception.returncode, EXIT_SINGULAR)

    def test_relative_out_under_output_dir(self):
        """Test that a relative --out lands in OUTPUT_DIR and nothing goes to stdout."""
        with tempfile.TemporaryDirectory() as tmp:
            with override_settings(ISOHYDRA={'OUTPUT_DIR': tmp}):
                text = run('potential', family='hydrogen', l=1, out='v.csv')
            self.assertEqual(text, '')
            _, columns = read_csv(Path(tmp) / 'v.csv')
            self.assertEqual(columns['V_base'], columns['V_deformed'])


class TestStatesCommand(SimpleTestCase):
    """Test `isohydra states`."""

    def test_hydrogen_states(self):
        """Test psi and |psi|^2 columns for n = 2, 3 at l = 1."""
        metadata, columns = read_csv(io.StringIO(run('states', family='hydrogen', l=1, nmax=3)))
        self.assertEqual(len(columns), 5)
        self.assertEqual(len(metadata['states']), 2)
        for entry in metadata['states'].values():
            self.assertAlmostEqual(entry['norm'], 1.0, places=10)

    def test_two_parameter_states(self):
        """Test two kernel states and the mapped states up to nmax."""
        metadata, _ = read_csv(io.StringIO(run('states', family='two-param', l=3, nu1=-1.0, nu2=-1.0, nmax=5)))
        energies = sorted(entry['energy'] for entry in metadata['states'].values())
        self.assertEqual(energies, [-0.25, -1.0 / 9.0, -1.0 / 16.0, -1.0 / 25.0])

    def test_boundary_gamma_has_no_states(self):
        """Test that the boundary gamma is refused with exit code 2."""
        with self.assertRaises(CommandError) as caught:
            run('states', family='fernandez', l=1, gamma=0.25)
        self.assertEqual(caught.exception.returncode, EXIT_DOMAIN)


class TestSpectrumCommand(SimpleTestCase):
    """Test `isohydra spectrum`."""

    def test_hydrogen_levels(self):
        """Test -1/4, -1/9, -1/16 for l = 1 by finite differences."""
        metadata, columns = read_csv(io.StringIO(run('spectrum', family='hydrogen', l=1, levels=3)))
        self.assertEqual(columns['analytic'], [-0.25, -1.0 / 9.0, -1.0 / 16.0])
        self.assertLess(max(columns['abs_error']), 2e-4)
        self.assertEqual(metadata['method'], 'fd_tridiagonal')
        self.assertTrue(all(check['pass'] for check in metadata['checks']))

    def test_failed_levels_exit_code(self):
        """Test that an unreachable level tolerance exits with 1."""
        with self.assertRaises(CommandError) as caught:
            run('spectrum', family='hydrogen', l=1, levels=2, tol=['level_tol=1e-300'])
        self.assertEqual(caught.exception.returncode, EXIT_FAILED)


class TestVerifyCommand(SimpleTestCase):
    """Test `isohydra verify` with a stand-in suite."""

    def test_failed_report(self):
        """Test exit code 1 naming the failed check, with the report still written."""
        report = VerificationReport()
        report.add('seeds.phi1_residual', 1.0, 1e-6)
        with patch('isospectral.management.commands.verify.run_suite', return_value=report) as suite:
            out = io.StringIO()
            with self.assertRaises(CommandError) as caught:
                call_command('verify', quick=True, stdout=out, stderr=io.StringIO())
        self.assertEqual(caught.exception.returncode, EXIT_FAILED)
        self.assertIn('seeds.phi1_residual', str(caught.exception))
        self.assertTrue(suite.call_args[0][0].quick)
        self.assertFalse(json.loads(out.getvalue())['pass'])

    def test_passing_report(self):
        """Test a clean exit and the gamma variant handed to the suite."""
        report = VerificationReport()
        report.add('ok', 0.0, 1e-6)
        with patch('isospectral.management.commands.verify.run_suite', return_value=report) as suite:
            text = run('verify', gamma_variant='printed')
        self.assertTrue(json.loads(text)['pass'])
        self.assertEqual(suite.call_args[0][0].gamma_variant.value, 'printed')
