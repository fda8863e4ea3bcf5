"""
Shared plumbing of the management commands: run configuration, argument
parsing, exit-code mapping and output handling.

Exit codes: 0 pass, 1 verification failure, 2 usage or domain error,
3 runtime singularity or numerical breakdown.
"""
import logging
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from django.core.management.base import BaseCommand, CommandError

from . import __version__
from .export import write_csv, write_json
from .factorization import CertificateFailure, v_star
from .families import fernandez_potential, v_tilde_two_param
from .hydrogen import potential_table
from .numerics import DomainError, FunctionTable, Grid, GridScheme, IsohydraError, ToleranceConfig
from .seeds import FamilyKind, FamilyParams, GammaVariant

logger = logging.getLogger(__name__)

EXIT_FAILED = 1
EXIT_DOMAIN = 2
EXIT_SINGULAR = 3


class Family(str, Enum):
    HYDROGEN = 'hydrogen'
    TWO_PARAM = 'two-param'
    FERNANDEZ = 'fernandez'
    INTERMEDIATE = 'intermediate'


class OutputFormat(str, Enum):
    CSV = 'csv'
    JSON = 'json'


def parse_tolerances(items: Optional[List[str]]) -> Dict[str, float]:
    """Turn repeated KEY=VAL strings into a dict of floats."""
    overrides: Dict[str, float] = {}
    for item in items or []:
        key, sep, value = item.partition('=')
        if not sep or not key.strip():
            raise DomainError(f"--tol expects KEY=VAL, got {item!r}")
        try:
            overrides[key.strip()] = float(value)
        except ValueError:
            raise DomainError(f"--tol {key.strip()} needs a number, got {value!r}")
    return overrides


def output_path(out: Optional[str]) -> Optional[str]:
    """Relative --out paths are resolved against ISOHYDRA['OUTPUT_DIR']."""
    if not out or os.path.isabs(out):
        return out
    from django.conf import settings
    return os.path.join(getattr(settings, 'ISOHYDRA', {}).get('OUTPUT_DIR', '.'), out)


@dataclass
class RunConfig:
    """Everything one command invocation needs, validated at parse time."""
    family: Family = Family.TWO_PARAM
    l: int = 3
    nu1: float = 0.0
    nu2: float = 0.0
    gamma: Optional[float] = None
    r_min: Optional[float] = None
    r_max: Optional[float] = None
    points: Optional[int] = None
    scheme: GridScheme = GridScheme.LOG_THEN_UNIFORM
    levels: int = 4
    n_max: Optional[int] = None
    output_format: OutputFormat = OutputFormat.CSV
    out: Optional[str] = None
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    gamma_variant: GammaVariant = GammaVariant.CONSISTENT

    def __post_init__(self):
        try:
            self.family = Family(self.family)
            self.scheme = GridScheme(self.scheme)
            self.output_format = OutputFormat(self.output_format)
            self.gamma_variant = GammaVariant(self.gamma_variant)
        except ValueError as exc:
            raise DomainError(str(exc)) from exc
        if isinstance(self.l, bool) or int(self.l) != self.l:
            raise DomainError(f"--l must be an integer, got {self.l!r}")
        self.l = int(self.l)
        minimum = 0 if self.family is Family.HYDROGEN else (1 if self.family is Family.FERNANDEZ else 2)
        if self.l < minimum:
            raise DomainError(f"--family {self.family.value} needs --l >= {minimum}, got {self.l}")
        if self.family is Family.FERNANDEZ:
            if self.gamma is None:
                raise DomainError("--family fernandez needs --gamma")
            if not math.isfinite(self.gamma):
                raise DomainError(f"--gamma must be finite, got {self.gamma}")
        if self.family is Family.INTERMEDIATE and self.nu1 != 0.0:
            raise DomainError(f"--family intermediate uses nu1 = 0, got --nu1 {self.nu1}")
        if self.family in (Family.TWO_PARAM, Family.INTERMEDIATE):
            self.family_params()
        if not 1 <= self.levels <= 12:
            raise DomainError(f"--levels must lie in 1..12, got {self.levels}")
        if self.n_max is not None and self.n_max < self.l + 1:
            raise DomainError(f"--nmax must be at least l+1={self.l + 1}, got {self.n_max}")
        self.grid()

    @classmethod
    def from_options(cls, options: Dict[str, object]) -> 'RunConfig':
        tolerances = ToleranceConfig.from_settings().with_overrides(parse_tolerances(options.get('tol')))
        return cls(
            family=options.get('family') or Family.TWO_PARAM,
            l=options.get('l', 3),
            nu1=options.get('nu1') or 0.0,
            nu2=options.get('nu2') or 0.0,
            gamma=options.get('gamma'),
            r_min=options.get('rmin'),
            r_max=options.get('rmax'),
            points=options.get('points'),
            scheme=options.get('scheme') or GridScheme.LOG_THEN_UNIFORM,
            levels=options.get('levels') or 4,
            n_max=options.get('nmax'),
            output_format=options.get('format') or OutputFormat.CSV,
            out=output_path(options.get('out')),
            tolerances=tolerances,
            gamma_variant=options.get('gamma_variant') or GammaVariant.CONSISTENT,
        )

    def family_params(self) -> FamilyParams:
        kind = FamilyKind.INTERMEDIATE if self.family is Family.INTERMEDIATE else FamilyKind.TWO_PARAM
        return FamilyParams(l=self.l, nu1=self.nu1, nu2=self.nu2, family=kind)

    def grid(self) -> Grid:
        return Grid.from_settings(r_min=self.r_min, r_max=self.r_max, n_points=self.points, scheme=self.scheme)

    def params_dict(self) -> Dict[str, object]:
        data: Dict[str, object] = {'family': self.family.value, 'l': self.l}
        if self.family is Family.FERNANDEZ:
            data['gamma'] = self.gamma
        elif self.family is not Family.HYDROGEN:
            data.update({'nu1': self.nu1, 'nu2': self.nu2, 'gamma_variant': self.gamma_variant.value})
        return data

    def metadata(self, command: str) -> Dict[str, object]:
        return {
            'command': command,
            'params': self.params_dict(),
            'grid': self.grid().to_dict(),
            'tolerances': self.tolerances.to_dict(),
            'version': __version__,
        }


def family_potential(config: RunConfig, grid: Grid) -> Tuple[FunctionTable, FunctionTable]:
    """Base and deformed potential of the configured family on grid; both are V_l for hydrogen."""
    if config.family is Family.HYDROGEN:
        base = potential_table(config.l, grid)
        return base, base
    if config.family is Family.TWO_PARAM:
        potential = v_tilde_two_param(config.family_params(), grid, config.tolerances)
    elif config.family is Family.FERNANDEZ:
        potential = fernandez_potential(config.l, config.gamma, grid)
    else:
        potential = v_star(config.l, config.nu2, grid, config.tolerances)
    return potential.base, potential.table


def exit_code_for(exc: IsohydraError) -> int:
    if isinstance(exc, DomainError):
        return EXIT_DOMAIN
    if isinstance(exc, CertificateFailure):
        return EXIT_FAILED
    # SingularFamily, CombinationZero and solver breakdowns alike
    return EXIT_SINGULAR


class IsohydraCommand(BaseCommand):
    """Base for the isohydra commands: common flags and error translation."""

    families = [family.value for family in Family]

    def add_arguments(self, parser):
        parser.add_argument('--family', choices=self.families, default=Family.TWO_PARAM.value)
        parser.add_argument('--l', type=int, default=3, help='Angular index l')
        parser.add_argument('--nu1', type=float, default=0.0)
        parser.add_argument('--nu2', type=float, default=0.0)
        parser.add_argument('--gamma', type=float, default=None, help='gamma_l of the one-parameter family')
        parser.add_argument('--rmin', type=float, default=None)
        parser.add_argument('--rmax', type=float, default=None)
        parser.add_argument('--points', type=int, default=None)
        parser.add_argument('--scheme', choices=[scheme.value for scheme in GridScheme],
                            default=GridScheme.LOG_THEN_UNIFORM.value)
        parser.add_argument('--levels', type=int, default=4)
        parser.add_argument('--nmax', type=int, default=None, help='Highest principal number of mapped states')
        parser.add_argument('--format', choices=[fmt.value for fmt in OutputFormat], default=OutputFormat.CSV.value)
        parser.add_argument('--out', default=None, help='Output path (stdout when omitted)')
        parser.add_argument('--tol', action='append', default=[], metavar='KEY=VAL',
                            help='Tolerance override, repeatable')
        parser.add_argument('--gamma-variant', dest='gamma_variant',
                            choices=[variant.value for variant in GammaVariant],
                            default=GammaVariant.CONSISTENT.value)

    def handle(self, *args, **options):
        try:
            config = RunConfig.from_options(options)
            return self.run(config)
        except IsohydraError as exc:
            code = exit_code_for(exc)
            if code == EXIT_DOMAIN:
                logger.warning(f"{self.command_name}: {exc}")
            else:
                logger.error(f"{self.command_name} failed: {exc}", exc_info=True)
            raise CommandError(str(exc), returncode=code) from exc

    @property
    def command_name(self) -> str:
        return self.__module__.rsplit('.', 1)[-1]

    def run(self, config: RunConfig) -> None:
        raise NotImplementedError

    def emit_table(self, config: RunConfig, columns: Dict[str, object],
                   extra_metadata: Optional[Dict[str, object]] = None) -> None:
        metadata = {**config.metadata(self.command_name), **(extra_metadata or {})}
        if config.output_format is OutputFormat.JSON:
            text = write_json(config.out, {'columns': columns}, metadata)
        else:
            text = write_csv(config.out, columns, metadata)
        self.finish(config, text)

    def emit_report(self, config: RunConfig, payload: Dict[str, object]) -> None:
        text = write_json(config.out, payload, config.metadata(self.command_name))
        self.finish(config, text)

    def finish(self, config: RunConfig, text: str) -> None:
        if config.out:
            logger.info(f"{self.command_name}: wrote {config.out}")
            self.stderr.write(f"Wrote {config.out}")
        else:
            self.stdout.write(text, ending='')
