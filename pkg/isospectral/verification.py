"""
Verification service: runs the certificate and spectral checks and
collects them into one VerificationReport.

The default sweep covers l in {2, 3} and nu1, nu2 in {-10, -1, -0.1};
quick mode keeps one representative case per check.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .factorization import (
    FirstOrderOp,
    riccati_certificate,
    spectrum_star,
    v_star,
    w1_eval,
    w2_eval,
)
from .families import (
    OperatorA,
    apply_A,
    crum_potential,
    crum_state,
    deformed_states,
    density_extrema,
    fernandez_potential,
    nu2_from_gamma,
    psi_tilde_mapped,
    spectrum_tilde,
    v_tilde_two_param,
)
from .hydrogen import hydrogen_spectrum, potential_table, radial_eigenfunction, radial_eigenfunctions
from .numerics import FunctionTable, Grid, GridScheme, ToleranceConfig, relative_residual, scaled_residual
from .seeds import (
    FamilyKind,
    FamilyParams,
    GammaVariant,
    beta_identity_residual,
    build_seed_pair,
    scan_denominator,
    seed_residuals,
)
from .spectralcheck import (
    EigenProblem,
    Method,
    TestFunction,
    VerificationReport,
    absent_level_check,
    bump_functions,
    compare_spectra,
    eigen_residual,
    eigensolve_fd,
    eigensolve_shooting,
    eigenvectors_fd,
    fit_proportionality,
    gaussian_bump,
    gram_matrix,
    intertwining_residual,
)

logger = logging.getLogger(__name__)

NU_VALUES = (-10.0, -1.0, -0.1)
FD_STEP = 0.005
# Dirichlet wall of both solvers; it lifts an l = 0 level by about u'(0)^2 r_min.
SOLVER_R_MIN = 1e-7
SHOOTING_POINTS = 20000
OPERATOR_STEP = 0.002
DOMAIN_SAMPLES = 200
DOMAIN_SEED = 20240101


@dataclass
class SuiteConfig:
    """Which checks the suite runs and at which tolerances."""
    tol: ToleranceConfig = field(default_factory=ToleranceConfig)
    quick: bool = False
    gamma_variant: GammaVariant = GammaVariant.CONSISTENT
    l_values: Tuple[int, ...] = (2, 3)
    nu_values: Tuple[float, ...] = NU_VALUES

    @property
    def nu_pairs(self) -> List[Tuple[float, float]]:
        if self.quick:
            return [(-10.0, -10.0), (-1.0, -1.0)]
        return list(itertools.product(self.nu_values, repeat=2))

    @property
    def cases(self) -> List[Tuple[int, float, float]]:
        l_values = (3,) if self.quick else self.l_values
        return [(l, nu1, nu2) for l in l_values for nu1, nu2 in self.nu_pairs]


def solver_r_max(l: int) -> float:
    """Dirichlet box for the lowest four levels of V_{l-2}: 40 n^2 for the deepest n = l + 2."""
    return 40.0 * (l + 2) ** 2


def fd_grid(r_max: float) -> Grid:
    return Grid.uniform(SOLVER_R_MIN, r_max, FD_STEP)


def shooting_grid(r_max: float) -> Grid:
    return Grid(SOLVER_R_MIN, r_max, SHOOTING_POINTS, GridScheme.LOG)


def states_grid() -> Grid:
    return Grid(1e-6, 300.0, 30000)


def operator_grid() -> Grid:
    return Grid.uniform(0.5, 20.0, OPERATOR_STEP)


def operator_test_functions(grid: Grid) -> List[TestFunction]:
    return bump_functions(grid) + [gaussian_bump(grid, center=9.0, width=0.7)]


def _fd_levels(potential: FunctionTable, n_levels: int, label: str):
    return eigensolve_fd(EigenProblem(potential=potential, n_levels=n_levels, method=Method.FD, label=label),
                         richardson=True)


def _shooting_levels(potential: FunctionTable, n_levels: int, label: str):
    return eigensolve_shooting(EigenProblem(potential=potential, n_levels=n_levels, method=Method.SHOOTING,
                                            label=label))


def check_hydrogen_baseline(report: VerificationReport, config: SuiteConfig) -> None:
    """V_1 on [SOLVER_R_MIN, 120] with 12000 points reproduces -1/4, -1/9, -1/16; the box is checked by doubling r_max."""
    tol = config.tol
    grid = Grid(SOLVER_R_MIN, 120.0, 12000, GridScheme.UNIFORM)
    numeric = eigensolve_fd(EigenProblem(potential_table(1, grid), n_levels=3, label='V_1'))
    analytic = hydrogen_spectrum(1, 3)
    report.add_spectrum('hydrogen.l1.fd', numeric)
    report.extend(compare_spectra(numeric, analytic.energies, tol.level_tol, 'hydrogen.l1.fd'))

    refined = _fd_levels(potential_table(1, grid), 3, 'V_1')
    shooting = _shooting_levels(potential_table(1, shooting_grid(120.0)), 3, 'V_1')
    report.add_spectrum('hydrogen.l1.shooting', shooting)
    report.extend(compare_spectra(shooting, refined.energies, tol.cross_method_tol, 'hydrogen.l1.cross_method'))

    if not config.quick:
        doubled = Grid(SOLVER_R_MIN, 240.0, 24000, GridScheme.UNIFORM)
        wide = eigensolve_fd(EigenProblem(potential_table(1, doubled), n_levels=3, label='V_1 doubled box'))
        report.extend(compare_spectra(wide, numeric.energies, tol.level_tol, 'hydrogen.l1.box_truncation'))


def check_isospectral_sweep(report: VerificationReport, config: SuiteConfig) -> None:
    """Lowest four levels of V~_{l-2} against V_{l-2}, against the analytic list and across both solvers."""
    tol = config.tol
    base_levels: Dict[int, List[float]] = {}
    for l, nu1, nu2 in config.cases:
        r_max = solver_r_max(l)
        name = f'isospectral.l{l}.nu({nu1:g},{nu2:g})'
        if l not in base_levels:
            base = _fd_levels(potential_table(l - 2, fd_grid(r_max)), 4, f'V_{l - 2}')
            report.add_spectrum(f'base.l{l - 2}.fd', base)
            base_levels[l] = base.energies
        params = FamilyParams(l=l, nu1=nu1, nu2=nu2)
        deformed = v_tilde_two_param(params, fd_grid(r_max), config.tol)
        numeric = _fd_levels(deformed.table, 4, name)
        report.add_spectrum(f'{name}.fd', numeric)
        report.extend(compare_spectra(numeric, spectrum_tilde(l, 2).energies, 2 * tol.level_tol, f'{name}.analytic'))
        report.extend(compare_spectra(numeric, base_levels[l], 2 * tol.level_tol, f'{name}.vs_base'))
        if config.quick and (nu1, nu2) != (-10.0, -10.0):
            continue
        shooting_table = v_tilde_two_param(params, shooting_grid(r_max), config.tol).table
        shooting = _shooting_levels(shooting_table, 4, name)
        report.add_spectrum(f'{name}.shooting', shooting)
        report.extend(compare_spectra(shooting, numeric.energies, tol.cross_method_tol, f'{name}.cross_method'))


def check_limits(report: VerificationReport, config: SuiteConfig) -> None:
    """nu = 0 recovers V_{l-2}; large gamma recovers V_{l-1}; the gamma to nu2 mapping matches the two-parameter family."""
    grid = states_grid()
    for l in ((3,) if config.quick else config.l_values):
        trivial = v_tilde_two_param(FamilyParams(l=l), grid)
        report.add(f'limits.l{l}.nu_zero', float(np.max(np.abs(trivial.delta))), 1e-12)

    wide = fernandez_potential(2, 1e8, grid)
    inner = grid.nodes <= 60.0
    report.add('limits.fernandez.large_gamma', float(np.max(np.abs(wide.delta[inner]))), 1e-4)

    gamma_l = -5.0
    one_param = fernandez_potential(2, gamma_l, grid)
    mapped = v_tilde_two_param(FamilyParams(l=3, nu1=0.0, nu2=nu2_from_gamma(2, gamma_l)), grid)
    difference = one_param.table.values - mapped.table.values
    report.add('limits.fernandez.nu2_mapping',
               relative_residual(difference[inner], one_param.delta[inner], mapped.delta[inner],
                                 one_param.base.values[inner]), 1e-8)


def check_seeds(report: VerificationReport, config: SuiteConfig) -> None:
    """Seed residuals, the dual-path g2 certificate and the beta identity."""
    tol = config.tol
    grid = states_grid()
    pairs = [(-1.0, -1.0)] if config.quick else [(-10.0, -10.0), (-1.0, -1.0), (-0.1, -0.1)]
    for l in ((3,) if config.quick else config.l_values):
        for nu1, nu2 in pairs:
            name = f'seeds.l{l}.nu({nu1:g},{nu2:g})'
            seeds = build_seed_pair(FamilyParams(l=l, nu1=nu1, nu2=nu2), grid, tol)
            for seed, value in seed_residuals(seeds).items():
                report.add(f'{name}.{seed}_residual', value, tol.residual_tol)
            report.add(f'{name}.g2_dual_path', seeds.branches.disagreement, 100 * tol.ode_tol)
            identity = beta_identity_residual(seeds)
            report.add(f'{name}.beta_identity', identity['corrected'], tol.residual_tol)
            report.notes.append(f"{name}: beta identity as printed leaves residual {identity['printed']:.3e}")


def check_family_domain(report: VerificationReport, config: SuiteConfig) -> None:
    """No sign change of W(g1, g2) for random nu1, nu2 in (-20, 0.99); nu1 = 1.5 has one."""
    grid = Grid(1e-6, 300.0, 6000)
    rng = np.random.default_rng(DOMAIN_SEED)
    samples = DOMAIN_SAMPLES // 10 if config.quick else DOMAIN_SAMPLES
    for l in ((3,) if config.quick else config.l_values):
        singular = [
            (nu1, nu2) for nu1, nu2 in rng.uniform(-20.0, 0.99, size=(samples, 2))
            if scan_denominator(FamilyParams(l=l, nu1=nu1, nu2=nu2), grid)
        ]
        report.add(f'domain.l{l}.singular_samples', len(singular), 0.5)
        if singular:
            report.notes.append(f"domain.l{l}: W(g1, g2) changes sign for {singular[:5]}")
        outside = FamilyParams(l=l, nu1=1.5, nu2=-1.0, checked=False)
        report.add(f'domain.l{l}.nu1(1.5).sign_changes', len(scan_denominator(outside, grid)), 0.5, above=True)


def check_intertwining(report: VerificationReport, config: SuiteConfig) -> None:
    """H~ A chi = A H chi on the bump set, with the wrong gamma variant as negative control."""
    tol = config.tol
    grid = operator_grid()
    bumps = operator_test_functions(grid)
    params = FamilyParams(l=3, nu1=-1.0, nu2=-1.0)
    seeds = build_seed_pair(params, grid, tol, verify_branches=False)
    deformed = v_tilde_two_param(params, grid, seeds=seeds)
    base = potential_table(params.l, grid)

    def residual(variant: GammaVariant) -> float:
        op = OperatorA.from_seeds(seeds, variant)
        return intertwining_residual(deformed.table, base, lambda chi: apply_A(op, chi), bumps)

    report.add('intertwining_residual', residual(config.gamma_variant), tol.residual_tol)
    control = GammaVariant.PRINTED if config.gamma_variant is GammaVariant.CONSISTENT else GammaVariant.CONSISTENT
    report.add(f'intertwining_residual.control[{control.value}]', residual(control), tol.residual_tol,
               above=control is GammaVariant.PRINTED)


def _chain(b1: FirstOrderOp, b2: FirstOrderOp) -> Callable[[FunctionTable], FunctionTable]:
    return lambda chi: b2.apply(b1.apply(chi))


def check_factorization(report: VerificationReport, config: SuiteConfig) -> None:
    """Riccati certificates, the product b2 b1 = A, its invariance and the chained intertwinings."""
    tol = config.tol
    grid = operator_grid()
    bumps = operator_test_functions(grid)

    for l in ((3,) if config.quick else config.l_values):
        params = FamilyParams(l=l, nu2=2.0, family=FamilyKind.INTERMEDIATE)
        certificate = riccati_certificate(params, grid, tol, raise_on_failure=False)
        name = f'factorization.l{l}.nu2(2)'
        report.add(f'{name}.riccati_residual', certificate.riccati_residual, tol.residual_tol)
        report.add(f'{name}.product_residual', certificate.product_residual, tol.residual_tol)
        report.add(f'{name}.star_formula_residual', certificate.star_formula_residual, tol.residual_tol)
        for label, value in certificate.hamiltonian_residuals.items():
            report.add(f'{name}.{label}', value, tol.residual_tol)
        report.add(f'{name}.delta2', abs(certificate.delta2 - certificate.expected_delta2), 1e-8)
        report.add(f'{name}.delta_gap', certificate.delta2 - certificate.delta1, 0.0, above=True)
        report.notes.extend(certificate.notes)

    params = FamilyParams(l=3, nu1=-1.0, nu2=-1.0)
    seeds = build_seed_pair(params, grid, tol, verify_branches=False)
    op = OperatorA.from_seeds(seeds, config.gamma_variant)
    tilted = (math.cos(-math.pi / 6), math.sin(-math.pi / 6))
    chains = [
        _chain(w1_eval(params, c1, c2, grid, seeds=seeds), w2_eval(params, c1, c2, grid, seeds=seeds))
        for c1, c2 in [(1.0, 0.0), tilted]
    ]
    hydrogen = radial_eigenfunction(4, 3, grid)
    worst_product = worst_invariance = 0.0
    for chi in [hydrogen] + [bump.table for bump in bumps]:
        reference = apply_A(op, chi).values
        first, second = (chain(chi).values for chain in chains)
        peak = float(np.max(np.abs(reference)))
        worst_product = max(worst_product, float(np.max(np.abs(first - reference))) / peak)
        worst_invariance = max(worst_invariance, float(np.max(np.abs(first - second))) / peak)
    report.add('factorization.product_identity', worst_product, tol.residual_tol)
    report.add('factorization.product_invariance', worst_invariance, 1e-7)

    deformed = v_tilde_two_param(params, grid, seeds=seeds)
    base = potential_table(3, grid)
    report.add('factorization.chain_intertwining',
               intertwining_residual(deformed.table, base, chains[1], bumps), tol.residual_tol)

    star_params = FamilyParams(l=3, nu2=2.0, family=FamilyKind.INTERMEDIATE)
    star_seeds = build_seed_pair(star_params, grid, tol, allow_singular=True, verify_branches=False)
    star = v_star(3, 2.0, grid, tol)
    b1 = w1_eval(star_params, 0.0, 1.0, grid, seeds=star_seeds)
    b2 = w2_eval(star_params, 0.0, 1.0, grid, seeds=star_seeds)
    report.add('factorization.star_first_step',
               intertwining_residual(star.table, base, b1.apply, bumps), tol.residual_tol)
    tilde = v_tilde_two_param(star_params, grid, seeds=star_seeds)
    keep = star_seeds.singular_mask(tol.pole_margin)
    report.add('factorization.star_second_step',
               intertwining_residual(tilde.table, star.table, b2.apply, bumps, mask=keep), tol.residual_tol)


def check_star_spectrum(report: VerificationReport, config: SuiteConfig) -> None:
    """V*_{l-1} at l=3, nu2=2: levels -1/4, -1/16, -1/25 and none near -1/9."""
    tol = config.tol
    l = 3
    analytic, absent = spectrum_star(l, 2)
    r_max = solver_r_max(l)
    numeric = _fd_levels(v_star(l, 2.0, fd_grid(r_max), tol).table, 3, 'V*_2')
    report.add_spectrum('star.l3.nu2(2).fd', numeric)
    report.extend(compare_spectra(numeric, analytic.energies, tol.level_tol, 'star.l3.nu2(2).fd'))
    report.extend([absent_level_check(numeric, absent, 1e-3, 'star.l3.nu2(2).absent_level')])
    if not config.quick:
        shooting = _shooting_levels(v_star(l, 2.0, shooting_grid(r_max), tol).table, 3, 'V*_2')
        report.add_spectrum('star.l3.nu2(2).shooting', shooting)
        report.extend(compare_spectra(shooting, numeric.energies, tol.cross_method_tol, 'star.l3.nu2(2).cross_method'))


def check_states(report: VerificationReport, config: SuiteConfig) -> None:
    """Gram matrices, eigen-residuals, the Crum oracles, the deformed densities at nu1 = nu2 = -10 and the solver eigenvectors."""
    tol = config.tol
    grid = states_grid()
    gram = gram_matrix(radial_eigenfunctions(2, [3, 4, 5], grid))
    report.add('states.hydrogen.l2.gram', float(np.max(np.abs(gram - np.eye(3)))), 1e-8)

    for nu in ((-10.0,) if config.quick else (-10.0, -1.0)):
        params = FamilyParams(l=3, nu1=nu, nu2=nu)
        name = f'states.l3.nu({nu:g},{nu:g})'
        seeds = build_seed_pair(params, grid, tol, verify_branches=False)
        states = deformed_states(params, grid, n_max=params.l + 3, seeds=seeds)
        gram = gram_matrix([state.table for state in states])
        report.add(f'{name}.gram', float(np.max(np.abs(gram - np.eye(len(states))))), 1e-6)
        for state in states:
            report.norms[f'{name}.{state.label}'] = state.measured_norm
        deformed = v_tilde_two_param(params, grid, seeds=seeds)
        worst = max(eigen_residual(deformed.table, state.table, state.energy) for state in states)
        report.add(f'{name}.eigen_residual', worst, tol.residual_tol)

        window = (grid.nodes > 0.1) & (grid.nodes < 60.0)
        crum = crum_potential(seeds)
        report.add(f'{name}.crum_potential',
                   scaled_residual((crum.values - deformed.table.values)[window], deformed.table.values[window]),
                   tol.residual_tol)
        kappas = []
        for n in (params.l + 1, params.l + 2):
            mapped = psi_tilde_mapped(n, params, grid, seeds=seeds)
            darboux = crum_state(seeds, radial_eigenfunction(n, params.l, grid), mapped.energy)
            kappa, misfit = fit_proportionality(mapped.table, darboux, mask=window)
            kappas.append(kappa)
            report.add(f'{name}.crum_state[{n}]', misfit, tol.residual_tol)
        report.notes.append(f"{name}: mapped to Darboux-determinant ratios {', '.join(f'{k:.12g}' for k in kappas)}")

    params = FamilyParams(l=3, nu1=-10.0, nu2=-10.0)
    states = deformed_states(params, grid, n_max=params.l + 1)
    ground, excited = states[0].table, states[1].table
    ground_peaks = density_extrema(ground)
    excited_peaks = density_extrema(excited)
    ground_at = ground.r[int(np.argmax(ground.values ** 2))]
    excited_at = excited.r[int(np.argmax(excited.values ** 2))]
    report.add('density.ground_maxima', abs(len(ground_peaks) - 1), 0.5)
    report.add('density.excited_maxima', len(excited_peaks), 1.5, above=True)
    # peaks come sorted by r
    highest = max(excited_peaks, key=lambda peak: peak[1])[0] if excited_peaks else math.nan
    outermost = excited_peaks[-1][0] if excited_peaks else math.nan
    report.add('density.excited_highest_is_outermost', outermost - highest, 1e-9)
    report.add('density.peak_order', excited_at - ground_at, 0.0, above=True)
    report.notes.append(
        f"deformed densities: ground maxima {[(round(r, 4), d) for r, d in ground_peaks]}, "
        f"excited maxima {[(round(r, 4), d) for r, d in excited_peaks]}"
    )

    if not config.quick:
        r_max = solver_r_max(params.l)
        uniform = fd_grid(r_max)
        problem = EigenProblem(v_tilde_two_param(params, uniform, tol).table, n_levels=3, label='V~_1')
        _, vectors = eigenvectors_fd(problem)
        analytic = deformed_states(params, vectors[0].grid, n_max=params.l + 1)
        for vector, state in zip(vectors, analytic):
            overlap = abs(float(gram_matrix([vector, state.normalized()])[0, 1]))
            report.add(f'states.eigenvector_overlap.{state.label}', 1.0 - overlap, 1e-5)


CHECKS: Sequence[Callable[[VerificationReport, SuiteConfig], None]] = (
    check_hydrogen_baseline,
    check_limits,
    check_seeds,
    check_family_domain,
    check_intertwining,
    check_factorization,
    check_star_spectrum,
    check_states,
    check_isospectral_sweep,
)


def run_suite(config: SuiteConfig) -> VerificationReport:
    """Run every check; failures are recorded in the report, not raised."""
    report = VerificationReport(
        params={
            'cases': [{'l': l, 'nu1': nu1, 'nu2': nu2} for l, nu1, nu2 in config.cases],
            'gamma_variant': config.gamma_variant.value,
            'quick': config.quick,
        },
        grid={
            'fd_step': FD_STEP,
            'shooting_points': SHOOTING_POINTS,
            'states': states_grid().to_dict(),
            'operators': operator_grid().to_dict(),
        },
        tolerances=config.tol.to_dict(),
    )
    for check in CHECKS:
        logger.info(f"Running {check.__name__}")
        check(report, config)
    status = 'passed' if report.passed else f"failed: {', '.join(report.failed_checks)}"
    logger.info(f"Verification {status}")
    return report
