"""
Deformed Hydrogen-like families built from the seed pair.

- Two-parameter family V~_{l-2} = V_{l-2} + 2 alpha', isospectral to V_{l-2}
- Its eigenfunctions: mapped states N A psi_nl and the two kernel states of A-dagger
- One-parameter family obtained at nu1 = 0 and its boundary case
- The second-order intertwiner A = d^2/dr^2 + beta d/dr + gamma and its adjoint
- Crum (Wronskian) oracles for the potential and the mapped states
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import optimize, signal

from .hydrogen import Spectrum, SpectrumSource, potential_table, radial_eigenfunction
from .numerics import (
    DomainError,
    FunctionTable,
    Grid,
    IsohydraError,
    ToleranceConfig,
    differentiate,
    regularized_lower_gamma,
    regularized_upper_gamma,
)
from .seeds import (
    FamilyKind,
    FamilyParams,
    GammaVariant,
    SeedPair,
    SingularFamily,
    build_seed_pair,
)

logger = logging.getLogger(__name__)


class MissingDerivatives(IsohydraError):
    """Raised when an operator needs d1/d2 that a FunctionTable does not carry."""


class PotentialKind(str, Enum):
    TWO_PARAM = 'two_param'
    FERNANDEZ = 'fernandez'
    INTERMEDIATE = 'intermediate'


@dataclass(eq=False)
class DeformedPotential:
    """A deformed potential next to the Hydrogen-like potential it deforms."""
    base_l: int
    kind: PotentialKind
    table: FunctionTable
    base: FunctionTable
    params: Optional[FamilyParams] = None
    gamma_l: Optional[float] = None
    singular_radii: List[float] = field(default_factory=list)

    def __post_init__(self):
        if not np.all(np.isfinite(self.table.values)) and not self.singular_radii:
            bad = self.table.r[np.argmax(~np.isfinite(self.table.values))]
            raise SingularFamily(f"{self.kind.value} potential is not finite at r={bad:.6g}", radius=float(bad))

    @property
    def delta(self) -> np.ndarray:
        return self.table.values - self.base.values

    def to_dict(self) -> Dict[str, object]:
        data = {'kind': self.kind.value, 'base_l': self.base_l}
        if self.params is not None:
            data.update(self.params.to_dict())
        if self.gamma_l is not None:
            data['gamma'] = self.gamma_l
        return data


@dataclass(eq=False)
class OperatorA:
    """Coefficients of A = d^2/dr^2 + beta d/dr + gamma on one grid; beta.d1 holds beta'."""
    beta: FunctionTable
    gamma: FunctionTable
    variant: GammaVariant = GammaVariant.CONSISTENT

    def __post_init__(self):
        if self.beta.grid != self.gamma.grid:
            raise DomainError("beta and gamma must share one grid")
        if self.beta.d1 is None:
            raise MissingDerivatives("OperatorA needs beta' in beta.d1")

    @classmethod
    def from_seeds(cls, seeds: SeedPair, variant: GammaVariant = GammaVariant.CONSISTENT) -> 'OperatorA':
        return cls(beta=seeds.beta, gamma=seeds.gamma(variant), variant=GammaVariant(variant))

    @property
    def grid(self) -> Grid:
        return self.beta.grid


def _require_derivatives(psi: FunctionTable, grid: Grid) -> None:
    if psi.d1 is None or psi.d2 is None:
        raise MissingDerivatives(f"{psi.label or 'table'} needs d1 and d2 populated")
    if psi.grid != grid:
        raise DomainError("Operator and function live on different grids")


def apply_A(op: OperatorA, psi: FunctionTable) -> FunctionTable:
    """A psi = psi'' + beta psi' + gamma psi."""
    _require_derivatives(psi, op.grid)
    values = psi.d2 + op.beta.values * psi.d1 + op.gamma.values * psi.values
    return FunctionTable(grid=psi.grid, values=values, label=f'A {psi.label}'.strip())


def apply_A_adjoint(op: OperatorA, psi: FunctionTable) -> FunctionTable:
    """A-dagger psi = psi'' - beta psi' + (gamma - beta') psi."""
    _require_derivatives(psi, op.grid)
    values = psi.d2 - op.beta.values * psi.d1 + (op.gamma.values - op.beta.d1) * psi.values
    return FunctionTable(grid=psi.grid, values=values, label=f'A+ {psi.label}'.strip())


def with_stencil_derivatives(table: FunctionTable) -> FunctionTable:
    """Copy of a table with d1 and d2 taken from the stencils."""
    first = differentiate(table, order=1).d1
    second = differentiate(table, order=2).d2
    return table.with_derivatives(d1=first, d2=second)


def _seeds_for(params: FamilyParams, grid: Grid, tol: Optional[ToleranceConfig],
               seeds: Optional[SeedPair]) -> SeedPair:
    if seeds is not None:
        if seeds.params != params or seeds.grid != grid:
            raise DomainError("Seed pair was built for different parameters or grid")
        return seeds
    return build_seed_pair(params, grid, tol, verify_branches=False)


def v_tilde_two_param(params: FamilyParams, grid: Grid, tol: Optional[ToleranceConfig] = None,
                      seeds: Optional[SeedPair] = None) -> DeformedPotential:
    """
    V~_{l-2} = V_{l-2} + 2 alpha' on the grid.

    Raises:
        SingularFamily: if W(g1, g2) vanishes inside the grid
    """
    seeds = _seeds_for(params, grid, tol, seeds)
    base = potential_table(params.l - 2, grid)
    values = base.values + 2.0 * seeds.terms.alpha_prime
    table = FunctionTable(grid=grid, values=values, label=f'V~_{params.l - 2}')
    logger.info(f"Built two-parameter potential for {params.to_dict()}")
    return DeformedPotential(
        base_l=params.l - 2,
        kind=PotentialKind.INTERMEDIATE if params.family is FamilyKind.INTERMEDIATE else PotentialKind.TWO_PARAM,
        table=table,
        base=base,
        params=params,
        singular_radii=list(seeds.singular_radii),
    )


@dataclass(eq=False)
class DeformedState:
    """An eigenfunction of a deformed Hamiltonian as constructed, with its measured norm."""
    label: str
    energy: float
    table: FunctionTable
    constant: float
    measured_norm: float

    def normalized(self) -> FunctionTable:
        return self.table.normalized(label=self.label)

    def to_dict(self) -> Dict[str, object]:
        return {
            'label': self.label,
            'energy': self.energy,
            'constant': self.constant,
            'measured_norm': self.measured_norm,
        }


def mapped_constant(n: int, l: int) -> float:
    """l(l-1) n^2 / sqrt((n^2 - l^2)(n^2 - l^2 + 2l - 1))."""
    if n <= l:
        raise DomainError(f"Mapped states need n > l, got n={n}, l={l}")
    gap = n * n - l * l
    return l * (l - 1) * n * n / math.sqrt(gap * (gap + 2 * l - 1))


def psi_tilde_mapped(n: int, params: FamilyParams, grid: Grid, tol: Optional[ToleranceConfig] = None,
                     seeds: Optional[SeedPair] = None,
                     variant: GammaVariant = GammaVariant.CONSISTENT) -> DeformedState:
    """psi~_{n,l-2} = N A psi_nl with the closed-form constant N."""
    seeds = _seeds_for(params, grid, tol, seeds)
    psi = radial_eigenfunction(n, params.l, grid)
    constant = mapped_constant(n, params.l)
    table = apply_A(OperatorA.from_seeds(seeds, variant), psi).scaled(constant, label=f'psi~({n},{params.l - 2})')
    measured = table.norm()
    logger.debug(f"psi~({n},{params.l - 2}) measured norm {measured:.12f}")
    return DeformedState(label=table.label, energy=-1.0 / n ** 2, table=table, constant=constant, measured_norm=measured)


def _require_two_param(params: FamilyParams) -> None:
    if params.family is not FamilyKind.TWO_PARAM or params.nu1 >= 1 or params.nu2 >= 1:
        raise DomainError(f"Kernel states need nu1 < 1 and nu2 < 1, got {params.to_dict()}")


def kernel_constants(params: FamilyParams) -> Tuple[float, float]:
    """Closed-form prefactors of the two kernel states."""
    l, a, big_l, s = params.l, params.a, params.big_l, params.s
    zero = math.sqrt((1.0 - params.nu1) * params.c1 * s) / big_l
    minus_one = math.sqrt(
        (1.0 - params.nu2) * math.exp((2 * l + 1) * math.log(2.0 / a) - math.lgamma(2 * l + 1)) * s / (2 * l)
    ) / big_l
    return zero, minus_one


def psi_kernel_0(params: FamilyParams, grid: Grid, tol: Optional[ToleranceConfig] = None,
                 seeds: Optional[SeedPair] = None) -> DeformedState:
    """Kernel state at -1/l^2: C0 r^l e^{-r/l} g2 / W(g1, g2) = C0 L^2 r^{l-1} e^{-r/l} g2_hat / Omega."""
    _require_two_param(params)
    seeds = _seeds_for(params, grid, tol, seeds)
    terms = seeds.terms
    constant, _ = kernel_constants(params)
    r = grid.nodes
    shape = params.big_l ** 2 * np.exp((params.l - 1) * np.log(r) - r / params.l) * terms.g2_hat / terms.omega
    table = FunctionTable(grid=grid, values=constant * shape, label=f'psi~({params.l - 2},0)')
    return DeformedState(label=table.label, energy=params.e1, table=table, constant=constant,
                         measured_norm=table.norm())


def psi_kernel_m1(params: FamilyParams, grid: Grid, tol: Optional[ToleranceConfig] = None,
                  seeds: Optional[SeedPair] = None) -> DeformedState:
    """Kernel state at -1/(l-1)^2: C-1 r^l e^{-r/l} g1 / W(g2, g1) = -C-1 L^2 r^{l-1} e^{-r/(l-1)} g1 / Omega."""
    _require_two_param(params)
    seeds = _seeds_for(params, grid, tol, seeds)
    terms = seeds.terms
    _, constant = kernel_constants(params)
    r = grid.nodes
    shape = -params.big_l ** 2 * np.exp((params.l - 1) * np.log(r) - r / params.a) * terms.g1 / terms.omega
    table = FunctionTable(grid=grid, values=constant * shape, label=f'psi~({params.l - 2},-1)')
    return DeformedState(label=table.label, energy=params.e2, table=table, constant=constant,
                         measured_norm=table.norm())


def deformed_states(params: FamilyParams, grid: Grid, n_max: int, tol: Optional[ToleranceConfig] = None,
                    seeds: Optional[SeedPair] = None) -> List[DeformedState]:
    """Kernel states followed by the mapped states n = l+1 .. n_max, in increasing energy."""
    seeds = _seeds_for(params, grid, tol, seeds)
    states = [psi_kernel_m1(params, grid, seeds=seeds), psi_kernel_0(params, grid, seeds=seeds)]
    states.extend(psi_tilde_mapped(n, params, grid, seeds=seeds) for n in range(params.l + 1, n_max + 1))
    return states


def spectrum_tilde(l: int, k_max: int) -> Spectrum:
    """-1/(l-1)^2, -1/l^2 and -1/(l+k)^2 for k = 1..k_max."""
    if l < 2 or k_max < 1:
        raise DomainError(f"spectrum_tilde needs l >= 2 and k_max >= 1, got l={l}, k_max={k_max}")
    entries = [(f'E~({l - 2},-1)', -1.0 / (l - 1) ** 2), (f'E~({l - 2},0)', -1.0 / l ** 2)]
    entries.extend((f'E~({l - 2},{k})', -1.0 / (l + k) ** 2) for k in range(1, k_max + 1))
    return Spectrum(entries=entries, source=SpectrumSource.ANALYTIC)


# ---------------------------------------------------------------------------
# One-parameter family
# ---------------------------------------------------------------------------

def abraham_moses_gamma(l: int) -> float:
    """Supremum (l/2)^{2l+1} (2l)! of int_0^r x^{2l} e^{-2x/l} dx; equals 1/4 at l = 1."""
    if l < 1:
        raise DomainError(f"The one-parameter family needs l >= 1, got l={l}")
    return (l / 2.0) ** (2 * l + 1) * math.factorial(2 * l)


def nu2_from_gamma(l: int, gamma_l: float) -> float:
    """nu2 of the two-parameter family at index l+1 (with nu1 = 0) that reproduces gamma_l."""
    if gamma_l == 0 or not math.isfinite(gamma_l):
        raise DomainError(f"gamma must be finite and nonzero, got {gamma_l!r}")
    return abraham_moses_gamma(l) / gamma_l


def fernandez_denominator_zero(l: int, gamma_l: float) -> Optional[float]:
    """Radius where gamma_l - int_0^r x^{2l} e^{-2x/l} dx vanishes, or None if it never does."""
    supremum = abraham_moses_gamma(l)
    if gamma_l < 0 or gamma_l >= supremum:
        return None
    if gamma_l == 0:
        return 0.0
    target = gamma_l / supremum

    def excess(r: float) -> float:
        return regularized_lower_gamma(2 * l + 1, 2.0 * r / l) - target

    upper = 1.0
    while excess(upper) < 0:
        upper *= 2.0
    return float(optimize.brentq(excess, 0.0, upper, xtol=1e-14, rtol=1e-14))


def fernandez_potential(l: int, gamma_l: float, grid: Grid) -> DeformedPotential:
    """
    V~_{l-1} = V_{l-1} + 2 d/dr {r^{2l} e^{-2r/l} / (gamma_l - int_0^r x^{2l} e^{-2x/l} dx)}.

    With R the braced function, R' = R (2l/r - 2/l) + R^2. At the boundary
    value gamma_l = (l/2)^{2l+1} (2l)! the denominator is evaluated through
    the finite exponential sum so it stays positive at every finite radius.

    Raises:
        SingularFamily: if the denominator vanishes inside the grid
    """
    supremum = abraham_moses_gamma(l)
    if not math.isfinite(gamma_l):
        raise DomainError(f"gamma must be finite, got {gamma_l!r}")
    zero = fernandez_denominator_zero(l, gamma_l)
    if zero is not None and zero <= grid.r_max:
        raise SingularFamily(
            f"The one-parameter denominator vanishes at r={zero:.6g} for l={l}, gamma={gamma_l}; "
            f"admissible values are gamma < 0 or gamma >= {supremum:.6g}",
            radius=zero,
        )
    if zero is not None:
        logger.warning(f"Denominator zero at r={zero:.4g} lies beyond r_max={grid.r_max}")

    r = grid.nodes
    x = 2.0 * r / l
    if gamma_l == supremum:
        partial = sum(np.exp(m * np.log(x) - math.lgamma(m + 1)) for m in range(2 * l + 1))
        ratio = np.exp(2 * l * np.log(r)) / (supremum * partial)
    else:
        denominator = (gamma_l - supremum) + supremum * regularized_upper_gamma(2 * l + 1, x)
        ratio = np.exp(2 * l * np.log(r) - x) / denominator
    ratio_prime = ratio * (2 * l / r - 2.0 / l) + ratio ** 2

    base = potential_table(l - 1, grid)
    table = FunctionTable(grid=grid, values=base.values + 2.0 * ratio_prime, label=f'V~_{l - 1}')
    logger.info(f"Built one-parameter potential for l={l}, gamma={gamma_l}")
    return DeformedPotential(base_l=l - 1, kind=PotentialKind.FERNANDEZ, table=table, base=base, gamma_l=gamma_l)


# ---------------------------------------------------------------------------
# Crum oracles
# ---------------------------------------------------------------------------

def crum_potential(seeds: SeedPair) -> FunctionTable:
    """V_l - 2 (ln |W(phi1, phi2)|)'' with the second derivative from the stencil."""
    params = seeds.params
    terms = seeds.terms
    r = seeds.grid.nodes
    scaled_wronskian = terms.g1_prime * terms.g2_hat - terms.g1 * terms.g2_prime_hat
    log_w = -2 * params.l * np.log(r) + 2.0 * r / params.l + r / params.big_l + np.log(np.abs(scaled_wronskian))
    second = differentiate(FunctionTable(grid=seeds.grid, values=log_w), order=2).d2
    base = potential_table(params.l, seeds.grid)
    return FunctionTable(grid=seeds.grid, values=base.values - 2.0 * second, label='V_crum')


def crum_state(seeds: SeedPair, psi: FunctionTable, energy: float) -> FunctionTable:
    """W(phi1, phi2, psi) / W(phi1, phi2) for an eigenfunction psi of H_l at the given energy."""
    if psi.d1 is None:
        raise MissingDerivatives(f"{psi.label or 'table'} needs d1 populated")
    params = seeds.params
    terms = seeds.terms
    r = seeds.grid.nodes
    v = potential_table(params.l, seeds.grid).values
    second = psi.d2 if psi.d2 is not None else (v - energy) * psi.values
    p = terms.p
    col1 = (terms.g1, p * terms.g1 + terms.g1_prime, (v - params.e1) * terms.g1)
    col2 = (terms.g2_hat, p * terms.g2_hat + terms.g2_prime_hat, (v - params.e2) * terms.g2_hat)
    minor_02 = col1[0] * col2[1] - col2[0] * col1[1]
    minor_01 = col1[0] * col2[2] - col2[0] * col1[2]
    minor_12 = col1[1] * col2[2] - col2[1] * col1[2]
    determinant = second * minor_02 - psi.d1 * minor_01 + psi.values * minor_12
    return FunctionTable(grid=seeds.grid, values=determinant / minor_02, label=f'crum {psi.label}'.strip())


def density_extrema(table: FunctionTable, relative_height: float = 1e-3) -> List[Tuple[float, float]]:
    """Local maxima (r, |psi|^2) of the density above relative_height times its peak."""
    density = table.values ** 2
    peaks, _ = signal.find_peaks(density, height=relative_height * float(np.max(density)))
    return [(float(table.r[i]), float(density[i])) for i in peaks]
