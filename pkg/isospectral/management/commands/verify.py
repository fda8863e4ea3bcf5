"""
Run the acceptance suite and write its JSON report.

Exits with 1 when any check fails; the failing checks are named in the
error message and marked in the report.

Usage:
    isohydra verify --out report.json
    isohydra verify --quick
    isohydra verify --quick --gamma-variant printed   # negative control
"""
import logging

from django.core.management.base import CommandError

from isospectral.cli import EXIT_FAILED, IsohydraCommand, RunConfig
from isospectral.verification import SuiteConfig, run_suite

logger = logging.getLogger(__name__)


class Command(IsohydraCommand):
    help = 'Run the certificate and spectral checks and report pass or fail'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--quick', action='store_true', help='Reduced sweep, one representative case per check')

    def handle(self, *args, **options):
        self.quick = bool(options.get('quick'))
        return super().handle(*args, **options)

    def run(self, config: RunConfig) -> None:
        suite = SuiteConfig(tol=config.tolerances, quick=self.quick, gamma_variant=config.gamma_variant)
        report = run_suite(suite)
        self.emit_report(config, report.to_dict())
        if not report.passed:
            failed = report.failed_checks
            logger.warning(f"verify: {len(failed)} check(s) failed")
            raise CommandError(f"Verification failed: {', '.join(failed)}", returncode=EXIT_FAILED)
