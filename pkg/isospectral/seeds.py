"""
Seed functions of the second-order intertwining construction.

For angular index l >= 2 write a = l - 1, L = l(l - 1), s = 2l - 1,
E1 = -1/l^2 and E2 = -1/a^2. The seeds

    g1(r) = 1 - nu1 P(2l+1, 2r/l)
    g2(r) = e^{r/L} (1 - r/L) {1 + nu2 (2/a)^{2l-1}/(2l-1)! int_0^r x^{2l} e^{-2x/a} / (L - x)^2 dx}

give the Schrodinger seed solutions phi_i = r^{-l} e^{r/l} g_i of H_l at
E1 and E2. The integral in g2 diverges at r = L while g2 itself stays
finite; integrating by parts gives the pole-free form

    g2(r) = e^{r/L} g2_hat(r),
    g2_hat(r) = (1 - r/L)(1 - nu2 P(2l, 2r/a)) + (nu2 k / L) r^{2l} e^{-2r/a},

with k = (2/a)^{2l-1}/(2l-1)!. Every derived quantity (the Wronskian,
beta, alpha, alpha') is computed from factored forms in which the
exponential growth and the small-r powers cancel analytically.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, List, Optional

import numpy as np

from .hydrogen import potential_table, potential_v
from .numerics import (
    ArrayLike,
    Direction,
    DomainError,
    FunctionTable,
    Grid,
    IsohydraError,
    ToleranceConfig,
    adaptive_quad,
    differentiate,
    ode_integrate_schrodinger,
    regularized_lower_gamma,
    relative_residual,
    scaled_residual,
)

logger = logging.getLogger(__name__)


class SingularFamily(IsohydraError):
    """Raised when the Wronskian-like denominator vanishes inside the grid."""

    def __init__(self, message: str, radius: Optional[float] = None):
        super().__init__(message)
        self.radius = radius


class BranchMismatch(IsohydraError):
    """Raised when the quadrature and ODE branches of g2 disagree on their overlap window."""

    def __init__(self, message: str, disagreement: float):
        super().__init__(message)
        self.disagreement = disagreement


class FamilyKind(str, Enum):
    TWO_PARAM = 'two_param'
    INTERMEDIATE = 'intermediate'


class GammaVariant(str, Enum):
    CONSISTENT = 'consistent'
    PRINTED = 'printed'


@dataclass(frozen=True)
class FamilyParams:
    """
    Angular index and integration constants of a deformed family.

    checked=False skips the nu ranges of the family (l and finiteness are
    still enforced) so that parameters outside them can be scanned for
    zeros of W(g1, g2).
    """
    l: int
    nu1: float = 0.0
    nu2: float = 0.0
    family: FamilyKind = FamilyKind.TWO_PARAM
    checked: bool = True

    def __post_init__(self):
        object.__setattr__(self, 'family', FamilyKind(self.family))
        if isinstance(self.l, bool) or int(self.l) != self.l or self.l < 2:
            raise DomainError(f"Deformed families need an integer l >= 2, got l={self.l!r}")
        object.__setattr__(self, 'l', int(self.l))
        for name in ('nu1', 'nu2'):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if not self.checked:
            return
        if self.family is FamilyKind.TWO_PARAM:
            if self.nu1 >= 1 or self.nu2 >= 1:
                raise DomainError(
                    f"The two-parameter family needs nu1 < 1 and nu2 < 1, got nu1={self.nu1}, nu2={self.nu2}; "
                    f"use --family intermediate for nu2 > 1"
                )
        elif self.nu2 <= 1:
            raise DomainError(f"The intermediate family needs nu2 > 1, got nu2={self.nu2}")

    @property
    def a(self) -> int:
        return self.l - 1

    @property
    def big_l(self) -> int:
        """Pole radius l(l-1) of the printed g2 integral."""
        return self.l * (self.l - 1)

    @property
    def s(self) -> int:
        return 2 * self.l - 1

    @property
    def e1(self) -> float:
        return -1.0 / self.l ** 2

    @property
    def e2(self) -> float:
        return -1.0 / self.a ** 2

    @property
    def epsilon(self) -> float:
        return self.e2 - self.e1

    @property
    def c1(self) -> float:
        return math.exp((2 * self.l + 1) * math.log(2.0 / self.l) - math.lgamma(2 * self.l + 1))

    @property
    def k(self) -> float:
        return math.exp((2 * self.l - 1) * math.log(2.0 / self.a) - math.lgamma(2 * self.l))

    def to_dict(self) -> Dict[str, object]:
        return {'l': self.l, 'nu1': self.nu1, 'nu2': self.nu2, 'family': self.family.value}


def c_d_constants(l: int) -> tuple:
    """c = (2l-1)^2 / (4 l^4 (l-1)^4) and d = (1 + (2l-1)^2) / (2 l^2 (l-1)^2)."""
    if isinstance(l, bool) or int(l) != l or l < 2:
        raise DomainError(f"c and d are defined for integer l >= 2, got {l!r}")
    s = 2 * l - 1
    big_l = l * (l - 1)
    return s ** 2 / (4.0 * big_l ** 4), (1.0 + s ** 2) / (2.0 * big_l ** 2)


class SeedTerms:
    """Pole-free building blocks of g1, g2 and their combinations at radii r."""

    def __init__(self, params: FamilyParams, r: ArrayLike):
        self.params = params
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise DomainError("Seed functions are defined for r >= 0")
        self.r = r
        l, a, big_l = params.l, params.a, params.big_l
        nu1, nu2 = params.nu1, params.nu2
        with np.errstate(divide='ignore'):
            log_r = np.log(r)
        self.p = np.where(r > 0, -l / np.where(r > 0, r, 1.0) + 1.0 / l, -np.inf)

        self.P1 = regularized_lower_gamma(2 * l + 1, 2 * r / l)
        self.P2 = regularized_lower_gamma(2 * l, 2 * r / a)
        self.q1 = np.exp((2 * l - 3) * log_r - 2 * r / l)
        self.q2 = np.exp((2 * l - 3) * log_r - 2 * r / a)
        c1, k = params.c1, params.k
        q1, q2, P2 = self.q1, self.q2, self.P2

        self.g1 = 1.0 - nu1 * self.P1
        self.g1_prime = -nu1 * c1 * r ** 3 * q1
        self.g2_hat = (1.0 - r / big_l) * (1.0 - nu2 * P2) + (nu2 * k / big_l) * r ** 3 * q2
        # g2' e^{-r/L}
        self.g2_prime_hat = (nu2 * k * r ** 3 * q2 - r * (1.0 - nu2 * P2)) / big_l ** 2
        self.g2_hat_prime = self.g2_prime_hat - self.g2_hat / big_l
        # d/dr of g1' and of g2' e^{-r/L}, differentiated term by term
        self.g1_second = -nu1 * c1 * (2 * l * r ** 2 * q1 - (2.0 / l) * r ** 3 * q1)
        self.g2_prime_hat_prime = (2 * l * nu2 * k * r ** 2 * q2 - (1.0 - nu2 * P2)) / big_l ** 2

        b2 = 1.0 - nu2 * P2 - nu2 * k * r ** 2 * q2
        self.omega = self.g1 * b2 - nu1 * c1 * big_l ** 2 * r ** 2 * q1 * self.g2_hat

        t2 = -(1.0 - nu2 * P2) / big_l + nu2 * k * r * q2 * (1.0 + r / big_l)
        self.theta = self.g1 * t2 + nu1 * c1 * big_l ** 2 * r * q1 * self.g2_hat

        s = 2 * l - 1
        b2_prime = -nu2 * k * s * r * q2
        m1_prime = s * r * q1 - (2.0 / l) * r ** 2 * q1
        self.omega_prime = (
            self.g1_prime * b2
            + self.g1 * b2_prime
            - nu1 * c1 * big_l ** 2 * (m1_prime * self.g2_hat + r ** 2 * q1 * self.g2_hat_prime)
        )
        p2_prime = (2.0 / a) * k * r ** 2 * q2
        n2_prime = (2 * l - 2) * q2 - (2.0 / a) * r * q2
        t2_prime = nu2 * p2_prime / big_l + nu2 * k * (n2_prime * (1.0 + r / big_l) + r * q2 / big_l)
        n1_prime = (2 * l - 2) * q1 - (2.0 / l) * r * q1
        self.theta_prime = (
            self.g1_prime * t2
            + self.g1 * t2_prime
            + nu1 * c1 * big_l ** 2 * (n1_prime * self.g2_hat + r * q1 * self.g2_hat_prime)
        )

    def check_denominator(self) -> None:
        bad = ~np.isfinite(self.omega) | (self.omega == 0.0)
        if np.any(bad):
            radius = float(np.atleast_1d(self.r)[np.argmax(np.atleast_1d(bad))])
            raise SingularFamily(f"W(g1, g2) vanishes at r={radius:.6g} for {self.params.to_dict()}", radius=radius)

    @property
    def alpha(self) -> np.ndarray:
        return self.params.s * self.theta / self.omega

    @property
    def alpha_prime(self) -> np.ndarray:
        return self.params.s * (self.theta_prime * self.omega - self.theta * self.omega_prime) / self.omega ** 2

    @property
    def beta(self) -> np.ndarray:
        return self.params.s * self.g1 * self.g2_hat / (self.r * self.omega)

    @property
    def beta_prime(self) -> np.ndarray:
        return self.alpha_prime - self.params.s / self.r ** 2

    @property
    def wronskian(self) -> np.ndarray:
        """W(g1, g2) = g1' g2 - g1 g2' = r e^{r/L} Omega / L^2."""
        big_l = self.params.big_l
        with np.errstate(over='ignore'):
            return self.r * np.exp(self.r / big_l) * self.omega / big_l ** 2


def _as_output(value: np.ndarray, r: ArrayLike):
    return float(value) if np.ndim(r) == 0 else value


def _positive_terms(params: FamilyParams, r: ArrayLike) -> SeedTerms:
    if np.any(np.asarray(r, dtype=float) <= 0):
        raise DomainError("beta and its relatives are defined for r > 0")
    terms = SeedTerms(params, r)
    terms.check_denominator()
    return terms


def g1_eval(params: FamilyParams, r: ArrayLike) -> ArrayLike:
    """g1(r) = 1 - nu1 P(2l+1, 2r/l)."""
    return _as_output(SeedTerms(params, r).g1, r)


def g2_closed_form(params: FamilyParams, r: ArrayLike) -> ArrayLike:
    """g2 from its pole-free closed form."""
    terms = SeedTerms(params, r)
    with np.errstate(over='ignore'):
        return _as_output(np.exp(terms.r / params.big_l) * terms.g2_hat, r)


def g2_prime(params: FamilyParams, r: ArrayLike) -> ArrayLike:
    terms = SeedTerms(params, r)
    with np.errstate(over='ignore'):
        return _as_output(np.exp(terms.r / params.big_l) * terms.g2_prime_hat, r)


def _g2_integral(params: FamilyParams, lower: float, upper: float, tol: ToleranceConfig) -> float:
    """k * int_lower^upper x^{2l} e^{-2x/a} / (L - x)^2 dx for upper < L."""
    l, a, big_l = params.l, params.a, params.big_l
    log_k = math.log(params.k)

    def integrand(x: float) -> float:
        if x <= 0.0:
            return 0.0
        return math.exp(log_k + 2 * l * math.log(x) - 2.0 * x / a) / (big_l - x) ** 2

    if upper <= lower:
        return 0.0
    return adaptive_quad(integrand, lower, upper, tol=tol.quad_tol, max_depth=200)


def g2_quadrature(params: FamilyParams, r: float, tol: Optional[ToleranceConfig] = None) -> float:
    """g2 evaluated from its integral representation; valid for 0 <= r < l(l-1)."""
    tol = tol or ToleranceConfig()
    big_l = params.big_l
    if not 0.0 <= r < big_l:
        raise DomainError(f"The g2 integral is only finite on [0, {big_l}), got r={r}")
    integral = _g2_integral(params, 0.0, r, tol)
    return math.exp(r / big_l) * (1.0 - r / big_l) * (1.0 + params.nu2 * integral)


def _phi_from_g2(params: FamilyParams, r: float, g2: float) -> float:
    return math.exp(-params.l * math.log(r) + r / params.l) * g2


def g2_eval(params: FamilyParams, r: float, tol: Optional[ToleranceConfig] = None) -> float:
    """
    g2(r) by its two-branch strategy.

    Below (1 - pole_margin) l(l-1) the integral is evaluated directly; beyond
    that, phi2 = r^{-l} e^{r/l} g2 is continued from r = l(l-1)/2 by Numerov
    at energy -1/(l-1)^2 and g2 is read back from it.
    """
    tol = tol or ToleranceConfig()
    if r < 0:
        raise DomainError(f"g2 is defined for r >= 0, got r={r}")
    big_l = params.big_l
    if params.nu2 == 0.0:
        return math.exp(r / big_l) * (1.0 - r / big_l)
    if r <= (1.0 - tol.pole_margin) * big_l:
        return g2_quadrature(params, r, tol)

    start = 0.5 * big_l
    grid = Grid.uniform(start, r, step=2e-3)
    nodes = grid.nodes
    phi0 = _phi_from_g2(params, nodes[0], g2_quadrature(params, nodes[0], tol))
    phi1 = _phi_from_g2(params, nodes[1], g2_quadrature(params, nodes[1], tol))
    solution = ode_integrate_schrodinger(
        potential_table(params.l, grid), params.e2,
        init_value=phi0, init_slope=(phi1 - phi0) / (nodes[1] - nodes[0]),
        direction=Direction.FORWARD, next_value=phi1,
    )
    phi = solution.values[-1]
    return math.copysign(
        math.exp(params.l * math.log(r) - r / params.l + solution.log_scale + math.log(abs(phi))), phi
    ) if phi != 0.0 else 0.0


@dataclass
class BranchComparison:
    """Overlap-window comparison of the two g2 branches (values are g2 e^{-r/L})."""
    radii: np.ndarray
    quadrature: np.ndarray
    continuation: np.ndarray
    disagreement: float
    continuation_deviation: float

    def to_dict(self) -> Dict[str, float]:
        return {
            'window': [float(self.radii[0]), float(self.radii[-1])],
            'disagreement': self.disagreement,
            'continuation_deviation': self.continuation_deviation,
        }


def g2_dual_path(params: FamilyParams, tol: Optional[ToleranceConfig] = None,
                 step: float = 2e-3, stride: int = 10) -> BranchComparison:
    """
    Compare the quadrature branch of g2 with its ODE continuation.

    The continuation starts from two quadrature values at l(l-1)/2, crosses
    the pole and runs to 2 l(l-1). The branches are compared on every
    `stride`-th node of [l(l-1)/2, (1 - pole_margin) l(l-1)]; the
    continuation is also compared with the closed form over its whole run.

    Raises:
        BranchMismatch: if the window disagreement exceeds 100 * ode_tol
    """
    tol = tol or ToleranceConfig()
    big_l = params.big_l
    switch = (1.0 - tol.pole_margin) * big_l
    grid = Grid.uniform(0.5 * big_l, 2.0 * big_l, step)
    r = grid.nodes
    window = np.flatnonzero(r <= switch)
    samples = np.union1d(window[::stride], [0, 1, window[-1]])

    integral = _g2_integral(params, 0.0, r[samples[0]], tol)
    quadrature = np.empty(samples.size)
    for position, index in enumerate(samples):
        if position:
            integral += _g2_integral(params, r[samples[position - 1]], r[index], tol)
        quadrature[position] = (1.0 - r[index] / big_l) * (1.0 + params.nu2 * integral)

    phi_start = np.exp(-params.l * np.log(r[:2]) + r[:2] / params.a) * quadrature[:2]
    solution = ode_integrate_schrodinger(
        potential_table(params.l, grid), params.e2,
        init_value=phi_start[0], init_slope=(phi_start[1] - phi_start[0]) / (r[1] - r[0]),
        direction=Direction.FORWARD, next_value=phi_start[1],
    )
    phi = solution.values
    with np.errstate(divide='ignore'):
        continuation = np.sign(phi) * np.exp(
            params.l * np.log(r) - r / params.a + solution.log_scale + np.log(np.abs(phi))
        )
    closed = SeedTerms(params, r).g2_hat

    disagreement = float(np.max(np.abs(continuation[samples] - quadrature)) / np.max(np.abs(quadrature)))
    deviation = float(np.max(np.abs(continuation - closed)) / np.max(np.abs(closed)))
    comparison = BranchComparison(
        radii=r[samples], quadrature=quadrature, continuation=continuation[samples],
        disagreement=disagreement, continuation_deviation=deviation,
    )
    logger.debug(f"g2 branches for {params.to_dict()}: disagreement {disagreement:.3g}, deviation {deviation:.3g}")
    if disagreement > 100 * tol.ode_tol:
        raise BranchMismatch(
            f"g2 quadrature and ODE branches disagree by {disagreement:.3g} on "
            f"[{r[samples[0]]:.4g}, {r[samples[-1]]:.4g}] (limit {100 * tol.ode_tol:.3g})",
            disagreement=disagreement,
        )
    return comparison


def beta_eval(params: FamilyParams, r: ArrayLike) -> ArrayLike:
    """beta = (1-2l)/(l^2 (l-1)^2) g1 g2 / (g2' g1 - g1' g2) = s g1 g2_hat / (r Omega)."""
    return _as_output(_positive_terms(params, r).beta, r)


def alpha_eval(params: FamilyParams, r: ArrayLike) -> ArrayLike:
    """alpha = beta + (1-2l)/r."""
    return _as_output(_positive_terms(params, r).alpha, r)


def alpha_prime(params: FamilyParams, r: ArrayLike) -> ArrayLike:
    """Closed-form derivative of alpha; vanishes identically at nu1 = nu2 = 0."""
    return _as_output(_positive_terms(params, r).alpha_prime, r)


def beta_prime(params: FamilyParams, r: ArrayLike) -> ArrayLike:
    return _as_output(_positive_terms(params, r).beta_prime, r)


def _gamma_from_terms(params: FamilyParams, terms: SeedTerms, variant: GammaVariant) -> np.ndarray:
    _, d = c_d_constants(params.l)
    beta = terms.beta
    base = beta ** 2 - terms.beta_prime - d
    r = terms.r
    if GammaVariant(variant) is GammaVariant.PRINTED:
        return (base - 2.0 * params.l * (params.l + 1) / r ** 2 + 1.0 / r) / 2.0
    return (base - 2.0 * potential_v(params.l, r)) / 2.0


def gamma_coeff(params: FamilyParams, r: ArrayLike,
                variant: GammaVariant = GammaVariant.CONSISTENT) -> ArrayLike:
    """
    Zeroth-order coefficient gamma of the intertwiner A.

    The consistent variant is (beta^2 - beta' - 2 V_l - d)/2. The printed
    variant keeps -2l(l+1)/r^2 + 1/r in place of -2 V_l and differs from it
    by -3/(2r).
    """
    terms = _positive_terms(params, r)
    return _as_output(_gamma_from_terms(params, terms, variant), r)


def wronskian_g(params: FamilyParams, r: ArrayLike) -> ArrayLike:
    """W(g1, g2) = g1' g2 - g1 g2'."""
    return _as_output(SeedTerms(params, r).wronskian, r)


def scan_denominator(params: FamilyParams, grid: Grid) -> List[float]:
    """Radii where W(g1, g2) changes sign between neighbouring nodes, linearly interpolated."""
    terms = SeedTerms(params, grid.nodes)
    omega = terms.omega
    r = grid.nodes
    flips = np.flatnonzero(np.sign(omega[:-1]) * np.sign(omega[1:]) <= 0)
    radii = []
    for i in flips:
        left, right = omega[i], omega[i + 1]
        if left == right:
            radii.append(float(r[i]))
        else:
            radii.append(float(r[i] + (r[i + 1] - r[i]) * left / (left - right)))
    return radii


@dataclass(eq=False)
class SeedPair:
    """Seed tables of one family on one grid."""
    params: FamilyParams
    grid: Grid
    g1: FunctionTable
    g2: FunctionTable
    g2_hat: FunctionTable
    phi1: FunctionTable
    phi2: FunctionTable
    wronskian_g: FunctionTable
    omega: FunctionTable
    singular_radii: List[float] = field(default_factory=list)
    branches: Optional[BranchComparison] = None

    @property
    def pole_location(self) -> float:
        return float(self.params.big_l)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    @cached_property
    def terms(self) -> SeedTerms:
        return SeedTerms(self.params, self.grid.nodes)

    def _table(self, values: np.ndarray, label: str) -> FunctionTable:
        return FunctionTable(grid=self.grid, values=values, label=label)

    @cached_property
    def beta(self) -> FunctionTable:
        return self._table(self.terms.beta, 'beta').with_derivatives(d1=self.terms.beta_prime)

    @cached_property
    def alpha(self) -> FunctionTable:
        return self._table(self.terms.alpha, 'alpha').with_derivatives(d1=self.terms.alpha_prime)

    def gamma(self, variant: GammaVariant = GammaVariant.CONSISTENT) -> FunctionTable:
        return self._table(_gamma_from_terms(self.params, self.terms, variant), f'gamma[{GammaVariant(variant).value}]')

    def singular_mask(self, margin: float) -> np.ndarray:
        """True on nodes farther than margin * max(1, r_s) from every singular radius."""
        keep = np.ones(self.grid.n_points, dtype=bool)
        for radius in self.singular_radii:
            keep &= np.abs(self.r - radius) > margin * max(1.0, radius)
        return keep


def build_seed_pair(params: FamilyParams, grid: Grid, tol: Optional[ToleranceConfig] = None,
                    allow_singular: bool = False, verify_branches: bool = True) -> SeedPair:
    """
    Tabulate g1, g2, phi1, phi2 and W(g1, g2) on a grid.

    Args:
        params: Family parameters
        grid: Radial grid
        tol: Tolerances (pole margin and ODE tolerance for the branch check)
        allow_singular: Record the radii where W(g1, g2) changes sign instead of raising
        verify_branches: Run the dual-path g2 check (skipped for nu2 = 0)

    Raises:
        SingularFamily: if W(g1, g2) changes sign on the grid and allow_singular is False
        BranchMismatch: if the g2 branches disagree
    """
    tol = tol or ToleranceConfig()
    r = grid.nodes
    terms = SeedTerms(params, r)
    singular = scan_denominator(params, grid)
    if singular and not allow_singular:
        raise SingularFamily(
            f"W(g1, g2) changes sign near r={singular[0]:.6g} for {params.to_dict()}",
            radius=singular[0],
        )
    if singular:
        logger.warning(f"W(g1, g2) vanishes at r={', '.join(f'{x:.4g}' for x in singular)} for {params.to_dict()}")

    branches = None
    if verify_branches and params.nu2 != 0.0:
        branches = g2_dual_path(params, tol)

    p = terms.p
    big_l = params.big_l
    with np.errstate(over='ignore', invalid='ignore'):
        growth = np.exp(r / big_l)
        envelope = np.exp(-params.l * np.log(r) + r / params.l)
        g2_values = growth * terms.g2_hat
        g2_d1 = growth * terms.g2_prime_hat
        phi2 = np.exp(-params.l * np.log(r) + r / params.a) * terms.g2_hat
        wronskian = terms.wronskian

    g1 = FunctionTable(grid=grid, values=terms.g1, d1=terms.g1_prime, d2=-2.0 * p * terms.g1_prime, label='g1')
    g2 = FunctionTable(
        grid=grid, values=g2_values, d1=g2_d1, d2=-2.0 * p * g2_d1 - params.epsilon * g2_values, label='g2',
    )
    g2_hat = FunctionTable(grid=grid, values=terms.g2_hat, d1=terms.g2_hat_prime, label='g2_hat')
    seeds = SeedPair(
        params=params,
        grid=grid,
        g1=g1,
        g2=g2,
        g2_hat=g2_hat,
        phi1=FunctionTable(grid=grid, values=envelope * terms.g1, label='phi1'),
        phi2=FunctionTable(grid=grid, values=phi2, label='phi2'),
        wronskian_g=FunctionTable(grid=grid, values=wronskian, label='W(g1,g2)'),
        omega=FunctionTable(grid=grid, values=terms.omega, label='Omega'),
        singular_radii=singular,
        branches=branches,
    )
    logger.info(f"Built seed pair for {params.to_dict()} on {grid.n_points} nodes")
    return seeds


def _interior(n: int, trim: int = 2) -> slice:
    return slice(trim, n - trim)


def seed_residuals(seeds: SeedPair) -> Dict[str, float]:
    """
    Schrodinger residuals of phi1 at E1 and phi2 at E2.

    With phi = r^{-l} e^{r/l} g, H_l phi - E phi = -r^{-l} e^{r/l} (g'' + 2p g' + (E - E1) g)
    where p = -l/r + 1/l. g' and g'' both come from the closed forms, so
    no stencil enters next to r_min. g2 is handled through
    g2' e^{-r/L}, whose derivative plus g2' e^{-r/L} / L is g2'' e^{-r/L}.
    Residuals are relative to the largest summed term magnitude on interior
    nodes.
    """
    params = seeds.params
    terms = seeds.terms
    inner = _interior(seeds.grid.n_points)
    p = terms.p

    g1_terms = (terms.g1_second, 2.0 * p * terms.g1_prime)
    g1_residual = g1_terms[0] + g1_terms[1]

    g2_terms = (
        terms.g2_prime_hat_prime,
        terms.g2_prime_hat / params.big_l,
        2.0 * p * terms.g2_prime_hat,
        params.epsilon * terms.g2_hat,
    )
    g2_residual = sum(g2_terms)
    return {
        'phi1': scaled_residual(g1_residual[inner], *(term[inner] for term in g1_terms)),
        'phi2': scaled_residual(g2_residual[inner], *(term[inner] for term in g2_terms)),
    }


def beta_identity_residual(seeds: SeedPair) -> Dict[str, float]:
    """
    Residual of the second-order identity linking beta, gamma and c.

    The corrected form beta beta'' - beta'^2/2 + (2 gamma - beta' - beta^2/2) beta^2 + 2c
    vanishes for every admissible family; the printed form with beta^2/2
    in place of beta'^2/2 does not. beta'' comes from the stencil of beta'.
    """
    c, _ = c_d_constants(seeds.params.l)
    terms = seeds.terms
    beta = terms.beta
    beta_d1 = terms.beta_prime
    beta_d2 = differentiate(FunctionTable(grid=seeds.grid, values=beta_d1), order=1).d1
    gamma = _gamma_from_terms(seeds.params, terms, GammaVariant.CONSISTENT)
    inner = _interior(seeds.grid.n_points)
    if seeds.singular_radii:
        inner = np.flatnonzero(seeds.singular_mask(0.1))[2:-2]

    common = (2 * gamma - beta_d1 - beta ** 2 / 2) * beta ** 2
    corrected_terms = (beta * beta_d2, -beta_d1 ** 2 / 2, common, np.full_like(beta, 2 * c))
    printed_terms = (beta * beta_d2, -beta ** 2 / 2, common, np.full_like(beta, 2 * c))
    return {
        'corrected': relative_residual(sum(corrected_terms)[inner], *(t[inner] for t in corrected_terms)),
        'printed': relative_residual(sum(printed_terms)[inner], *(t[inner] for t in printed_terms)),
    }
