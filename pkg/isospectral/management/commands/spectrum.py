"""
Compare the analytic levels of a family with a direct numerical solve.

Rows are matched in sorted order. For the intermediate family, and for the
boundary value of gamma in the one-parameter family, one extra row reports
the level that is absent: its numeric column holds the nearest solved
level and `absent` is 1.

Usage:
    isohydra spectrum --family two-param --l 3 --nu1 -10 --nu2 -10
    isohydra spectrum --family intermediate --l 3 --nu2 2 --levels 3
    isohydra spectrum --family hydrogen --l 1 --method shooting
"""
import logging
import math
from typing import Dict, List, Optional, Tuple

from django.core.management.base import CommandError

from isospectral.cli import EXIT_FAILED, Family, IsohydraCommand, RunConfig, family_potential
from isospectral.factorization import spectrum_star
from isospectral.families import abraham_moses_gamma, spectrum_tilde
from isospectral.hydrogen import hydrogen_spectrum
from isospectral.numerics import Grid, GridScheme
from isospectral.spectralcheck import (
    EigenProblem,
    Method,
    absent_level_check,
    compare_spectra,
    eigensolve_fd,
    eigensolve_shooting,
)
from isospectral.verification import FD_STEP, SHOOTING_POINTS, SOLVER_R_MIN

logger = logging.getLogger(__name__)

ABSENT_WINDOW = 1e-3


def analytic_levels(config: RunConfig) -> Tuple[List[float], Optional[float]]:
    """The first `levels` analytic energies and the absent level, if the family has one."""
    l, levels = config.l, config.levels
    if config.family is Family.HYDROGEN:
        return hydrogen_spectrum(l, levels).energies, None
    if config.family is Family.TWO_PARAM:
        return spectrum_tilde(l, max(1, levels - 2)).energies[:levels], None
    if config.family is Family.INTERMEDIATE:
        spectrum, absent = spectrum_star(l, max(1, levels - 1))
        return spectrum.energies[:levels], absent
    if config.gamma == abraham_moses_gamma(l):
        return hydrogen_spectrum(l - 1, levels + 1).energies[1:], -1.0 / l ** 2
    return hydrogen_spectrum(l - 1, levels).energies, None


def solver_grid(config: RunConfig, deepest: float, method: Method) -> Grid:
    """Dirichlet box of 30 n^2 for the deepest principal number n unless --rmax is given."""
    r_min = config.r_min or SOLVER_R_MIN
    r_max = config.r_max or 30.0 * math.ceil(deepest) ** 2
    if method is Method.SHOOTING:
        return Grid(r_min, r_max, config.points or SHOOTING_POINTS, GridScheme.LOG)
    if config.points:
        return Grid(r_min, r_max, config.points, GridScheme.UNIFORM)
    return Grid.uniform(r_min, r_max, FD_STEP)


def spectrum_rows(analytic: List[float], numeric: List[float], absent: Optional[float]) -> Dict[str, List[float]]:
    rows = [(expected, numeric[i], abs(numeric[i] - expected), 0.0) for i, expected in enumerate(analytic)]
    if absent is not None:
        nearest = min(numeric, key=lambda value: abs(value - absent))
        rows.append((absent, nearest, abs(nearest - absent), 1.0))
    rows.sort(key=lambda row: row[0])
    return {
        'index': [float(i) for i in range(len(rows))],
        'analytic': [row[0] for row in rows],
        'numeric': [row[1] for row in rows],
        'abs_error': [row[2] for row in rows],
        'absent': [row[3] for row in rows],
    }


class Command(IsohydraCommand):
    help = 'Analytic against numerically solved levels, with the absent-level row where one applies'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--method', choices=['fd', 'shooting'], default='fd',
                            help='Finite differences with Richardson extrapolation, or Numerov shooting')

    def handle(self, *args, **options):
        self.method = Method.SHOOTING if options.get('method') == 'shooting' else Method.FD
        return super().handle(*args, **options)

    def run(self, config: RunConfig) -> None:
        analytic, absent = analytic_levels(config)
        deepest = math.sqrt(-1.0 / analytic[-1])
        _, potential = family_potential(config, solver_grid(config, deepest, self.method))
        problem = EigenProblem(potential=potential, n_levels=len(analytic), method=self.method,
                               label=f'{config.family.value} l={config.l}')
        if self.method is Method.FD:
            numeric = eigensolve_fd(problem, richardson=True)
        else:
            numeric = eigensolve_shooting(problem)

        checks = compare_spectra(numeric, analytic, config.tolerances.level_tol, 'spectrum')
        if absent is not None:
            checks.append(absent_level_check(numeric, absent, ABSENT_WINDOW, 'spectrum.absent_level'))
        failed = [check.name for check in checks if not check.passed]

        self.emit_table(config, spectrum_rows(analytic, numeric.energies, absent), extra_metadata={
            'method': self.method.value,
            'solver_grid': potential.grid.to_dict(),
            'checks': [check.to_dict() for check in checks],
        })
        if failed:
            logger.warning(f"spectrum: levels outside tolerance: {', '.join(failed)}")
            raise CommandError(f"Levels outside tolerance: {', '.join(failed)}", returncode=EXIT_FAILED)
