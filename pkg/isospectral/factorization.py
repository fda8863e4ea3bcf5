"""
First-order factorization of the intertwiner, A = b2 b1 with b_j = d/dr + w_j.

The combination G = c1 g1 + c2 g2 drives everything: with rho = G'/G and
p = -l/r + 1/l,

    f = w2 = p + beta + rho,    w1 = -(p + rho) = l/r - 1/l - rho,

and since g_i'' = -2p g_i' - (E_i - E1) g_i, rho' = -2p rho - c2 eps g2/G - rho^2
with eps = E2 - E1. G is handled as G e^{-r/L} whenever c2 != 0.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .families import DeformedPotential, DeformedState, PotentialKind
from .hydrogen import Spectrum, SpectrumSource, potential_table, radial_eigenfunction
from .numerics import (
    DomainError,
    FunctionTable,
    Grid,
    IsohydraError,
    ToleranceConfig,
    cumulative_integral,
    relative_residual,
)
from .seeds import FamilyKind, FamilyParams, SeedPair, SeedTerms, SingularFamily, build_seed_pair

logger = logging.getLogger(__name__)


class CombinationZero(IsohydraError):
    """Raised when c1 g1 + c2 g2 changes sign on the grid."""

    def __init__(self, message: str, radius: Optional[float] = None):
        super().__init__(message)
        self.radius = radius


class CertificateFailure(IsohydraError):
    """Raised when a factorization residual exceeds its tolerance."""

    def __init__(self, message: str, failed: List[str]):
        super().__init__(message)
        self.failed = failed


@dataclass(eq=False)
class FirstOrderOp:
    """b = d/dr + w; w.d1 holds w'."""
    w: FunctionTable

    def apply(self, chi: FunctionTable) -> FunctionTable:
        """b chi = chi' + w chi, with (b chi)' populated when chi carries d2."""
        if chi.d1 is None:
            raise DomainError(f"{chi.label or 'table'} needs d1 for a first-order operator")
        values = chi.d1 + self.w.values * chi.values
        d1 = None
        if chi.d2 is not None and self.w.d1 is not None:
            d1 = chi.d2 + self.w.d1 * chi.values + self.w.values * chi.d1
        return FunctionTable(grid=chi.grid, values=values, d1=d1, label=f'b {chi.label}'.strip())

    def apply_adjoint(self, chi: FunctionTable) -> FunctionTable:
        """b-dagger chi = -chi' + w chi."""
        if chi.d1 is None:
            raise DomainError(f"{chi.label or 'table'} needs d1 for a first-order operator")
        values = -chi.d1 + self.w.values * chi.values
        d1 = None
        if chi.d2 is not None and self.w.d1 is not None:
            d1 = -chi.d2 + self.w.d1 * chi.values + self.w.values * chi.d1
        return FunctionTable(grid=chi.grid, values=values, d1=d1, label=f'b+ {chi.label}'.strip())


@dataclass
class KernelCombination:
    """rho = G'/G and rho' for G = c1 g1 + c2 g2, with the scaled G itself."""
    c1: float
    c2: float
    scaled: np.ndarray
    rho: np.ndarray
    rho_prime: np.ndarray
    second_ratio: np.ndarray


def combination(terms: SeedTerms, c1: float, c2: float, check: bool = True) -> KernelCombination:
    """
    Evaluate G = c1 g1 + c2 g2 and its logarithmic derivatives.

    Raises:
        DomainError: for (c1, c2) = (0, 0)
        CombinationZero: if G changes sign between neighbouring radii
    """
    if c1 == 0 and c2 == 0:
        raise DomainError("The combination c1 g1 + c2 g2 needs (c1, c2) != (0, 0)")
    params = terms.params
    r = terms.r
    p = terms.p
    if c2 == 0:
        scaled = c1 * terms.g1
        scaled_prime = c1 * terms.g1_prime
        rho = scaled_prime / scaled
        second_ratio = -2.0 * p * rho
    else:
        decay = np.exp(-r / params.big_l)
        scaled = c1 * terms.g1 * decay + c2 * terms.g2_hat
        scaled_prime = c1 * terms.g1_prime * decay + c2 * terms.g2_prime_hat
        rho = scaled_prime / scaled
        second_ratio = -2.0 * p * rho - c2 * params.epsilon * terms.g2_hat / scaled
    if check:
        signs = np.sign(scaled)
        flips = np.flatnonzero((signs[:-1] * signs[1:]) <= 0)
        if flips.size:
            radius = float(np.atleast_1d(r)[flips[0]])
            raise CombinationZero(
                f"c1 g1 + c2 g2 vanishes near r={radius:.6g} for (c1, c2)=({c1:g}, {c2:g}), {params.to_dict()}",
                radius=radius,
            )
    return KernelCombination(
        c1=c1, c2=c2, scaled=scaled, rho=rho, rho_prime=second_ratio - rho ** 2, second_ratio=second_ratio,
    )


def _seeds(params: FamilyParams, grid: Grid, tol: Optional[ToleranceConfig],
           seeds: Optional[SeedPair]) -> SeedPair:
    if seeds is not None:
        return seeds
    allow = params.family is FamilyKind.INTERMEDIATE
    return build_seed_pair(params, grid, tol, allow_singular=allow, verify_branches=False)


def f_general(params: FamilyParams, c1: float, c2: float, grid: Grid, tol: Optional[ToleranceConfig] = None,
              seeds: Optional[SeedPair] = None) -> FunctionTable:
    """General Riccati solution f = 1/l - l/r + beta + d/dr ln(c1 g1 + c2 g2); d1 holds f'."""
    seeds = _seeds(params, grid, tol, seeds)
    terms = seeds.terms
    combo = combination(terms, c1, c2)
    r = grid.nodes
    values = terms.p + terms.beta + combo.rho
    slope = params.l / r ** 2 + terms.beta_prime + combo.rho_prime
    return FunctionTable(grid=grid, values=values, d1=slope, label=f'f({c1:g},{c2:g})')


def w1_eval(params: FamilyParams, c1: float, c2: float, grid: Grid, tol: Optional[ToleranceConfig] = None,
            seeds: Optional[SeedPair] = None) -> FirstOrderOp:
    """b1 with w1 = l/r - 1/l - d/dr ln(c1 g1 + c2 g2)."""
    seeds = _seeds(params, grid, tol, seeds)
    combo = combination(seeds.terms, c1, c2)
    r = grid.nodes
    values = -(seeds.terms.p + combo.rho)
    slope = -params.l / r ** 2 - combo.rho_prime
    return FirstOrderOp(w=FunctionTable(grid=grid, values=values, d1=slope, label=f'w1({c1:g},{c2:g})'))


def w2_eval(params: FamilyParams, c1: float, c2: float, grid: Grid, tol: Optional[ToleranceConfig] = None,
            seeds: Optional[SeedPair] = None) -> FirstOrderOp:
    """b2 with w2 = beta - w1 = f."""
    return FirstOrderOp(w=f_general(params, c1, c2, grid, tol, seeds))


def kernel_from_riccati(f: FunctionTable) -> FunctionTable:
    """Normalized exp(integral f), the kernel element of A-dagger that f describes."""
    exponent = cumulative_integral(f)
    exponent -= np.max(exponent)
    table = FunctionTable(grid=f.grid, values=np.exp(exponent), label=f'exp int {f.label}'.strip())
    return table.normalized()


def _star_from_combination(params: FamilyParams, terms: SeedTerms, combo: KernelCombination) -> Tuple[np.ndarray, np.ndarray]:
    """V* by the closed form l(l-1)/r^2 - 2/r + 2 (rho^2 - G''/G), and by V_l + 2 w1'."""
    r = terms.r
    l = params.l
    printed = l * (l - 1) / r ** 2 - 2.0 / r + 2.0 * (combo.rho ** 2 - combo.second_ratio)
    w1_prime = -l / r ** 2 - combo.rho_prime
    chained = l * (l + 1) / r ** 2 - 2.0 / r + 2.0 * w1_prime
    return printed, chained


def v_star(l: int, nu2: float, grid: Grid, tol: Optional[ToleranceConfig] = None) -> DeformedPotential:
    """
    Intermediate potential V*_{l-1} = l(l-1)/r^2 - 2/r + 2 [(g2')^2 - g2'' g2] / g2^2.

    Raises:
        DomainError: for nu2 <= 1
        SingularFamily: if g2 vanishes inside the grid
    """
    if nu2 <= 1:
        raise DomainError(f"The intermediate potential needs nu2 > 1, got nu2={nu2}")
    params = FamilyParams(l=l, nu1=0.0, nu2=nu2, family=FamilyKind.INTERMEDIATE)
    terms = SeedTerms(params, grid.nodes)
    try:
        combo = combination(terms, 0.0, 1.0)
    except CombinationZero as exc:
        raise SingularFamily(f"g2 vanishes near r={exc.radius:.6g} for nu2={nu2}", radius=exc.radius) from exc
    printed, _ = _star_from_combination(params, terms, combo)
    base = potential_table(l - 1, grid)
    table = FunctionTable(grid=grid, values=printed, label=f'V*_{l - 1}')
    logger.info(f"Built intermediate potential for l={l}, nu2={nu2}")
    return DeformedPotential(base_l=l - 1, kind=PotentialKind.INTERMEDIATE, table=table, base=base, params=params)


def v_star_chained(l: int, nu2: float, grid: Grid) -> FunctionTable:
    """V_l + 2 w1' with (c1, c2) = (0, 1)."""
    params = FamilyParams(l=l, nu1=0.0, nu2=nu2, family=FamilyKind.INTERMEDIATE)
    terms = SeedTerms(params, grid.nodes)
    _, chained = _star_from_combination(params, terms, combination(terms, 0.0, 1.0))
    return FunctionTable(grid=grid, values=chained, label=f'V*_{l - 1} chained')


def psi_star_states(l: int, nu2: float, n_max: int, grid: Grid) -> List[DeformedState]:
    """
    Eigenfunctions of H*_{l-1}: r^l e^{-r/l} / g2 at -1/(l-1)^2, then b1 psi_nl for n = l+1 .. n_max.

    Each table is normalized on the grid; measured_norm holds the norm before normalization.
    """
    if n_max < l + 1:
        raise DomainError(f"n_max must be at least l+1={l + 1}, got {n_max}")
    star = v_star(l, nu2, grid)
    params = star.params
    terms = SeedTerms(params, grid.nodes)
    r = grid.nodes
    ground = FunctionTable(
        grid=grid, values=np.exp(l * np.log(r) - r / params.a) / terms.g2_hat, label=f'psi*({l - 1},-1)',
    )
    states = [ground]
    b1 = FirstOrderOp(w=_w1_table(params, terms, grid, 0.0, 1.0))
    for n in range(l + 1, n_max + 1):
        psi = radial_eigenfunction(n, l, grid)
        mapped = b1.apply(psi)
        states.append(FunctionTable(grid=grid, values=mapped.values, label=f'psi*({n},{l - 1})'))

    energies = [params.e2] + [-1.0 / n ** 2 for n in range(l + 1, n_max + 1)]
    result = []
    for table, level in zip(states, energies):
        norm = table.norm()
        result.append(DeformedState(
            label=table.label, energy=level, table=table.normalized(label=table.label),
            constant=1.0 / norm, measured_norm=norm,
        ))
    return result


def _w1_table(params: FamilyParams, terms: SeedTerms, grid: Grid, c1: float, c2: float) -> FunctionTable:
    combo = combination(terms, c1, c2)
    r = terms.r
    grid_values = -(terms.p + combo.rho)
    return FunctionTable(
        grid=grid, values=grid_values, d1=-params.l / r ** 2 - combo.rho_prime,
        label=f'w1({c1:g},{c2:g})',
    )


def spectrum_star(l: int, k_max: int) -> Tuple[Spectrum, float]:
    """Levels of H*_{l-1}: -1/(l-1)^2 and -1/(l+k)^2, together with the absent level -1/l^2."""
    if l < 2 or k_max < 1:
        raise DomainError(f"spectrum_star needs l >= 2 and k_max >= 1, got l={l}, k_max={k_max}")
    entries = [(f'E*({l - 1},-1)', -1.0 / (l - 1) ** 2)]
    entries.extend((f'E*({l - 1},{k})', -1.0 / (l + k) ** 2) for k in range(1, k_max + 1))
    spectrum = Spectrum(entries=entries, source=SpectrumSource.ANALYTIC, notes={'absent': -1.0 / l ** 2})
    return spectrum, -1.0 / l ** 2


@dataclass
class FactorizationCertificate:
    """Residuals of the two-step factorization at the measured factorization energies."""
    delta1: float
    delta2: float
    riccati_residual: float
    product_residual: float
    hamiltonian_residuals: Dict[str, float]
    combination: Tuple[float, float]
    expected_delta2: float
    star_formula_residual: float
    masked_radii: List[float] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    def failures(self, threshold: float) -> List[str]:
        checks = {
            'riccati_residual': self.riccati_residual,
            'product_residual': self.product_residual,
            'star_formula_residual': self.star_formula_residual,
            **{f'hamiltonian_residuals.{name}': value for name, value in self.hamiltonian_residuals.items()},
        }
        return [name for name, value in checks.items() if not value < threshold]

    @property
    def ordered(self) -> bool:
        """delta1 < delta2; False in the two-parameter regime, where b1 factors at -1/l^2."""
        return self.delta1 < self.delta2

    def to_dict(self) -> Dict[str, object]:
        return {
            'delta1': self.delta1,
            'delta2': self.delta2,
            'expected_delta2': self.expected_delta2,
            'riccati_residual': self.riccati_residual,
            'product_residual': self.product_residual,
            'star_formula_residual': self.star_formula_residual,
            'hamiltonian_residuals': self.hamiltonian_residuals,
            'combination': list(self.combination),
            'masked_radii': self.masked_radii,
            'notes': self.notes,
        }


def riccati_certificate(params: FamilyParams, grid: Grid, tol: Optional[ToleranceConfig] = None,
                        raise_on_failure: bool = True) -> FactorizationCertificate:
    """
    Certify H_l = b1+ b1 + d1, H* = b1 b1+ + d1, H* = b2+ b2 + d2 and H~ = b2 b2+ + d2.

    The intermediate regime uses (c1, c2) = (0, 1) with d1 = -1/(l-1)^2;
    the two-parameter regime uses (1, 0) with d1 = -1/l^2, so there the
    labels run the other way: d1 = -1/l^2 lies above d2 = -1/(l-1)^2 and
    `ordered` is False. d2 is measured as the median of V* - w2^2 + w2' and
    is expected at the remaining kernel energy. Radii where W(g1, g2)
    vanishes are masked with a window of pole_margin * max(1, r).

    Raises:
        CertificateFailure: naming every residual at or above residual_tol
    """
    tol = tol or ToleranceConfig()
    seeds = _seeds(params, grid, tol, None)
    terms = seeds.terms
    if params.family is FamilyKind.INTERMEDIATE:
        c1, c2, delta1, expected = 0.0, 1.0, params.e2, params.e1
    else:
        c1, c2, delta1, expected = 1.0, 0.0, params.e1, params.e2
    combo = combination(terms, c1, c2)
    r = grid.nodes
    l = params.l

    keep = seeds.singular_mask(tol.pole_margin)
    keep[:2] = keep[-2:] = False

    w1 = -(terms.p + combo.rho)
    w1_prime = -l / r ** 2 - combo.rho_prime
    w2 = terms.p + terms.beta + combo.rho
    w2_prime = l / r ** 2 + terms.beta_prime + combo.rho_prime
    v_l = potential_table(l, grid).values
    star_printed, star_chained = _star_from_combination(params, terms, combo)
    v_tilde = potential_table(l - 2, grid).values + 2.0 * terms.alpha_prime
    gamma = seeds.gamma().values

    def residual(*parts: np.ndarray) -> float:
        total = sum(parts)
        return relative_residual(total[keep], *(part[keep] for part in parts))

    delta2 = float(np.median((star_printed - w2 ** 2 + w2_prime)[keep]))
    constant1 = np.full_like(r, delta1)
    constant2 = np.full_like(r, delta2)
    hamiltonian = {
        'H_l = b1+b1 + delta1': residual(v_l, -w1 ** 2, w1_prime, -constant1),
        'H* = b1b1+ + delta1': residual(star_printed, -w1 ** 2, -w1_prime, -constant1),
        'H* = b2+b2 + delta2': residual(star_printed, -w2 ** 2, w2_prime, -constant2),
        'H~ = b2b2+ + delta2': residual(v_tilde, -w2 ** 2, -w2_prime, -constant2),
    }
    certificate = FactorizationCertificate(
        delta1=delta1,
        delta2=delta2,
        riccati_residual=residual(-w1_prime, w1 ** 2, -v_l, constant1),
        product_residual=residual(gamma, -w1_prime, -w1 * w2),
        hamiltonian_residuals=hamiltonian,
        combination=(c1, c2),
        expected_delta2=expected,
        star_formula_residual=residual(star_printed, -star_chained),
        masked_radii=list(seeds.singular_radii),
        notes=['H* is taken as H*_{l-1} in both factorizations'],
    )
    logger.info(f"Factorization certificate for {params.to_dict()}: delta2={delta2:.12g}")
    failed = certificate.failures(tol.residual_tol)
    if failed and raise_on_failure:
        raise CertificateFailure(f"Factorization residuals above {tol.residual_tol:g}: {', '.join(failed)}", failed)
    return certificate
