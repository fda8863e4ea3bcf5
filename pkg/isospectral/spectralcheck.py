"""
Independent numerical checks of the constructions.

Two eigensolvers for -u'' + V u = E u with Dirichlet ends (a three-point
finite-difference tridiagonal solve and Numerov shooting with node-count
bracketing), operator residuals on compact test bumps, Gram matrices
and the report types used by the verification suite.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import hermite_e
from scipy import interpolate, linalg, optimize

from .hydrogen import Spectrum, SpectrumSource
from .numerics import (
    Direction,
    DomainError,
    FunctionTable,
    Grid,
    GridScheme,
    IsohydraError,
    derivative_at,
    differentiate,
    integrate_table,
    ode_integrate_schrodinger,
    scaled_residual,
)

logger = logging.getLogger(__name__)

MAX_LEVELS = 12
DECAY_EXPONENT = 30.0


class ConvergenceFailure(IsohydraError):
    """Raised when the tridiagonal eigensolver fails on a level."""

    def __init__(self, message: str, level: int):
        super().__init__(message)
        self.level = level


class BracketFailure(IsohydraError):
    """Raised when node counting cannot isolate a level."""

    def __init__(self, message: str, level: int):
        super().__init__(message)
        self.level = level


class Method(str, Enum):
    FD = 'fd_tridiagonal'
    SHOOTING = 'numerov_shooting'


@dataclass(eq=False)
class EigenProblem:
    """Lowest n_levels bound states of -d^2/dr^2 + V with Dirichlet ends of the potential's grid."""
    potential: FunctionTable
    n_levels: int = 4
    method: Method = Method.FD
    label: str = ''

    def __post_init__(self):
        self.method = Method(self.method)
        if isinstance(self.n_levels, bool) or int(self.n_levels) != self.n_levels or not 1 <= self.n_levels <= MAX_LEVELS:
            raise DomainError(f"n_levels must be an integer in 1..{MAX_LEVELS}, got {self.n_levels!r}")
        self.n_levels = int(self.n_levels)
        if not np.all(np.isfinite(self.potential.values)):
            raise DomainError(f"Potential {self.potential.label!r} is not finite on the grid")
        deepest = self.effective_l + self.n_levels
        if 2.0 * deepest ** 2 > self.grid.r_max / 2.0:
            logger.warning(
                f"Turning point of level n={deepest:.3g} (about {2 * deepest ** 2:.4g}) lies beyond "
                f"r_max/2={self.grid.r_max / 2:.4g} for {self.label or self.potential.label}"
            )

    @property
    def grid(self) -> Grid:
        return self.potential.grid

    @property
    def effective_l(self) -> float:
        """Centrifugal index read off r_min^2 V(r_min)."""
        r0 = self.grid.nodes[0]
        strength = r0 * r0 * self.potential.values[0]
        if strength <= 0:
            return 0.0
        return (-1.0 + math.sqrt(1.0 + 4.0 * strength)) / 2.0


def _uniform_potential(potential: FunctionTable) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and potential values on a uniform grid; other schemes are resampled through r^2 V."""
    grid = potential.grid
    if grid.is_uniform:
        return grid.nodes, potential.values
    r = grid.nodes
    spline = interpolate.CubicSpline(r, r * r * potential.values)
    nodes = np.linspace(grid.r_min, grid.r_max, grid.n_points)
    logger.debug(f"Resampled {potential.label!r} onto {nodes.size} uniform nodes")
    return nodes, spline(nodes) / nodes ** 2


def _tridiagonal_levels(nodes: np.ndarray, values: np.ndarray, n_levels: int,
                        vectors: bool = False):
    h = nodes[1] - nodes[0]
    diagonal = 2.0 / h ** 2 + values[1:-1]
    off_diagonal = np.full(diagonal.size - 1, -1.0 / h ** 2)
    try:
        return linalg.eigh_tridiagonal(
            diagonal, off_diagonal, eigvals_only=not vectors,
            select='i', select_range=(0, n_levels - 1), lapack_driver='stebz',
        )
    except (linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceFailure(f"Tridiagonal eigensolver failed: {exc}", level=0) from exc


def _check_levels(energies: np.ndarray, n_levels: int) -> None:
    if energies.size < n_levels:
        raise ConvergenceFailure(f"Only {energies.size} of {n_levels} levels were returned", level=int(energies.size))
    bad = np.flatnonzero(~np.isfinite(energies))
    if bad.size:
        raise ConvergenceFailure(f"Level {bad[0]} did not converge", level=int(bad[0]))


def _spectrum(energies: Sequence[float], method: Method, notes: Optional[Dict[str, object]] = None) -> Spectrum:
    return Spectrum(
        entries=[(f'E[{i}]', float(value)) for i, value in enumerate(energies)],
        source=SpectrumSource.NUMERIC,
        notes={'method': method.value, **(notes or {})},
    )


def eigensolve_fd(problem: EigenProblem, richardson: bool = False) -> Spectrum:
    """
    Three-point finite differences with Dirichlet ends.

    The lowest levels come from Sturm-sequence bisection on the symmetric
    tridiagonal matrix. The discretization error is O(h^2); with
    richardson=True the solve is repeated on every second node and the
    levels are extrapolated as (4 E_h - E_2h) / 3.

    Raises:
        ConvergenceFailure: naming the first level that failed
    """
    nodes, values = _uniform_potential(problem.potential)
    if richardson and nodes.size % 2 == 0:
        nodes, values = nodes[:-1], values[:-1]
    fine = np.asarray(_tridiagonal_levels(nodes, values, problem.n_levels))
    _check_levels(fine, problem.n_levels)
    notes: Dict[str, object] = {'step': float(nodes[1] - nodes[0])}
    energies = fine
    if richardson:
        coarse = np.asarray(_tridiagonal_levels(nodes[::2], values[::2], problem.n_levels))
        _check_levels(coarse, problem.n_levels)
        energies = (4.0 * fine - coarse) / 3.0
        notes['richardson'] = True
    logger.info(f"FD levels for {problem.label or problem.potential.label}: {', '.join(f'{e:.10g}' for e in energies)}")
    return _spectrum(energies, Method.FD, notes)


def eigenvectors_fd(problem: EigenProblem) -> Tuple[np.ndarray, List[FunctionTable]]:
    """Levels and unit-norm eigenvectors (by inverse iteration) on the uniform solve grid."""
    nodes, values = _uniform_potential(problem.potential)
    energies, vectors = _tridiagonal_levels(nodes, values, problem.n_levels, vectors=True)
    _check_levels(np.asarray(energies), problem.n_levels)
    grid = Grid(float(nodes[0]), float(nodes[-1]), nodes.size, GridScheme.UNIFORM)
    tables = []
    for i in range(problem.n_levels):
        padded = np.concatenate([[0.0], vectors[:, i], [0.0]])
        tables.append(FunctionTable(grid=grid, values=padded, label=f'u[{i}]').normalized())
    return np.asarray(energies), tables


class _Shooter:
    """Numerov shooting on one potential; node counts are cached per energy."""

    def __init__(self, potential: FunctionTable):
        self.potential = potential
        self.grid = potential.grid
        self.r = self.grid.nodes
        self.values = potential.values
        self._counts: Dict[float, int] = {}

    def _count_stop(self, energy: float) -> int:
        allowed = np.flatnonzero(self.values < energy)
        n = self.grid.n_points
        if allowed.size == 0:
            return -1
        turning = int(allowed[-1])
        if turning >= n - 2:
            return n - 1
        kappa = np.sqrt(np.maximum(self.values[turning:] - energy, 0.0))
        steps = np.diff(self.r[turning:])
        decay = np.concatenate([[0.0], np.cumsum(0.5 * (kappa[1:] + kappa[:-1]) * steps)])
        beyond = np.flatnonzero(decay >= DECAY_EXPONENT)
        return min(n - 1, turning + int(beyond[0])) if beyond.size else n - 1

    def count(self, energy: float) -> int:
        """Sign changes of the outward solution up to where it has grown by e^30 past the turning point."""
        if energy in self._counts:
            return self._counts[energy]
        stop = self._count_stop(energy)
        if stop < 2:
            nodes = 0
        else:
            u = ode_integrate_schrodinger(self.potential, energy, 0.0, 1.0, stop_index=stop).values[1:stop + 1]
            signs = np.sign(u[u != 0.0])
            nodes = int(np.count_nonzero(signs[1:] != signs[:-1]))
        self._counts[energy] = nodes
        return nodes

    def matching_index(self, energy: float) -> int:
        allowed = np.flatnonzero(self.values < energy)
        index = int(allowed[-1]) if allowed.size else self.grid.n_points // 2
        return min(max(index, 5), self.grid.n_points - 6)

    def mismatch(self, energy: float, index: int) -> float:
        """Wronskian of the outward and inward solutions at one node, each scaled to unit (u, u') length."""
        outward = ode_integrate_schrodinger(self.potential, energy, 0.0, 1.0, stop_index=index + 2).values
        inward = ode_integrate_schrodinger(
            self.potential, energy, 0.0, -1.0, direction=Direction.BACKWARD, stop_index=index - 2,
        ).values
        u_out, u_in = outward[index], inward[index]
        slope_out = derivative_at(outward, self.grid, index)
        slope_in = derivative_at(inward, self.grid, index)
        scale = math.sqrt((u_out ** 2 + slope_out ** 2) * (u_in ** 2 + slope_in ** 2))
        return (slope_out * u_in - slope_in * u_out) / scale


def eigensolve_shooting(problem: EigenProblem, energy_max: float = 0.0, max_bisections: int = 200) -> Spectrum:
    """
    Numerov shooting from both ends with node-count bookkeeping.

    Each level is first isolated by bisecting on the node count of the
    outward solution, then located by Brent's method on the scaled
    Wronskian of the outward and inward solutions at the outer turning
    point of the bracket's upper energy.

    Raises:
        BracketFailure: if node counting cannot isolate a level
    """
    shooter = _Shooter(problem.potential)
    lower = float(np.min(problem.potential.values))
    upper = float(energy_max)
    available = shooter.count(upper)
    if available < problem.n_levels:
        raise BracketFailure(
            f"Only {available} levels lie below E={upper:g} for {problem.label or problem.potential.label}",
            level=available,
        )
    energies = []
    low = lower
    for level in range(problem.n_levels):
        high = upper
        for _ in range(max_bisections):
            if shooter.count(low) == level and shooter.count(high) == level + 1:
                break
            middle = 0.5 * (low + high)
            if shooter.count(middle) <= level:
                low = middle
            else:
                high = middle
        else:
            raise BracketFailure(f"Could not isolate level {level} by node counting", level=level)
        index = shooter.matching_index(high)
        try:
            value = optimize.brentq(shooter.mismatch, low, high, args=(index,), xtol=1e-14,
                                    rtol=4 * np.finfo(float).eps)
        except ValueError as exc:
            raise BracketFailure(f"Matching function does not change sign around level {level}: {exc}",
                                 level=level) from exc
        energies.append(value)
        low = high
    logger.info(f"Shooting levels for {problem.label or problem.potential.label}: "
                f"{', '.join(f'{e:.10g}' for e in energies)}")
    return _spectrum(energies, Method.SHOOTING)


def solve(problem: EigenProblem, **kwargs) -> Spectrum:
    if problem.method is Method.FD:
        return eigensolve_fd(problem, **kwargs)
    return eigensolve_shooting(problem, **kwargs)


# ---------------------------------------------------------------------------
# Operator residuals
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class TestFunction:
    """Compactly supported test function with analytic derivatives up to fourth order."""
    table: FunctionTable
    d3: np.ndarray
    d4: np.ndarray

    @property
    def label(self) -> str:
        return self.table.label


def _from_derivatives(grid: Grid, derivatives: List[np.ndarray], label: str) -> TestFunction:
    table = FunctionTable(grid=grid, values=derivatives[0], d1=derivatives[1], d2=derivatives[2], label=label)
    return TestFunction(table=table, d3=derivatives[3], d4=derivatives[4])


def bump_functions(grid: Grid, starts: Sequence[float] = (2.0, 6.0, 12.0), width: float = 4.0,
                   power: int = 6) -> List[TestFunction]:
    """
    ((r - a)(a + w - r) / (w/2)^2)^power on [a, a + w], zero elsewhere.

    With power 6 the bump vanishes with five derivatives at both ends. It is
    evaluated as (1 - x^2)^power in x = (r - mid) / (w/2), so the
    coefficients stay binomial and d^k/dr^k = (w/2)^-k d^k/dx^k.
    """
    r = grid.nodes
    half = width / 2.0
    bump = Polynomial([1.0, 0.0, -1.0]) ** power
    bumps = []
    for start in starts:
        stop = start + width
        if start <= grid.r_min or stop >= grid.r_max:
            raise DomainError(f"Bump support [{start}, {stop}] must lie inside ({grid.r_min}, {grid.r_max})")
        inside = (r > start) & (r < stop)
        x = (r[inside] - (start + half)) / half
        derivatives = []
        for order in range(5):
            values = np.zeros_like(r)
            values[inside] = bump.deriv(order)(x) / half ** order if order else bump(x)
            derivatives.append(values)
        bumps.append(_from_derivatives(grid, derivatives, f'bump[{start:g},{stop:g}]'))
    return bumps


def gaussian_bump(grid: Grid, center: float, width: float) -> TestFunction:
    """exp(-(r - c)^2 / (2 w^2)); d^k/dx^k e^{-x^2/2} = (-1)^k He_k(x) e^{-x^2/2}."""
    x = (grid.nodes - center) / width
    envelope = np.exp(-0.5 * x * x)
    derivatives = []
    for order in range(5):
        coefficients = np.zeros(order + 1)
        coefficients[order] = 1.0
        derivatives.append((-1) ** order * hermite_e.hermeval(x, coefficients) * envelope / width ** order)
    return _from_derivatives(grid, derivatives, f'gauss[{center:g},{width:g}]')


def _potential_derivatives(potential: FunctionTable) -> FunctionTable:
    if potential.d1 is not None and potential.d2 is not None:
        return potential
    first = differentiate(potential, order=1).d1 if potential.d1 is None else potential.d1
    second = differentiate(potential, order=2).d2 if potential.d2 is None else potential.d2
    return potential.with_derivatives(d1=first, d2=second)


def hamiltonian_apply(potential: FunctionTable, chi: TestFunction) -> FunctionTable:
    """H chi = -chi'' + V chi with its first two derivatives; stencil derivatives of V when the table lacks them."""
    v = _potential_derivatives(potential)
    table = chi.table
    values = -table.d2 + v.values * table.values
    d1 = -chi.d3 + v.d1 * table.values + v.values * table.d1
    d2 = -chi.d4 + v.d2 * table.values + 2.0 * v.d1 * table.d1 + v.values * table.d2
    return FunctionTable(grid=table.grid, values=values, d1=d1, d2=d2, label=f'H {table.label}')


def intertwining_residual(H_left: FunctionTable, H_right: FunctionTable,
                          op_apply: Callable[[FunctionTable], FunctionTable],
                          test_set: Sequence[TestFunction], mask: Optional[np.ndarray] = None,
                          trim: int = 4) -> float:
    """
    max over chi of ||H_left (O chi) - O (H_right chi)||_inf / ||O chi||_inf.

    O chi and O (H chi) use analytic derivatives; the outer H_left takes the
    stencil second derivative of O chi. Only nodes where mask is True enter
    the norms.
    """
    grid = H_left.grid
    keep = np.ones(grid.n_points, dtype=bool) if mask is None else np.asarray(mask, dtype=bool).copy()
    keep[:trim] = keep[grid.n_points - trim:] = False
    worst = 0.0
    for chi in test_set:
        mapped = op_apply(chi.table)
        second = differentiate(FunctionTable(grid=grid, values=mapped.values), order=2).d2
        left = -second + H_left.values * mapped.values
        right = op_apply(hamiltonian_apply(H_right, chi)).values
        scale = float(np.max(np.abs(mapped.values[keep])))
        if scale == 0.0:
            raise DomainError(f"The operator annihilates {chi.label} on the compared nodes")
        residual = float(np.max(np.abs(left - right)[keep])) / scale
        logger.debug(f"Intertwining residual on {chi.label}: {residual:.3e}")
        worst = max(worst, residual)
    return worst


def eigen_residual(potential: FunctionTable, state: FunctionTable, energy: float, trim: int = 4) -> float:
    """Scaled residual of -psi'' + (V - E) psi with a stencil psi''."""
    second = differentiate(FunctionTable(grid=state.grid, values=state.values), order=2).d2
    terms = (-second, potential.values * state.values, -energy * state.values)
    inner = slice(trim, state.grid.n_points - trim)
    return scaled_residual(sum(terms)[inner], *(term[inner] for term in terms))


def gram_matrix(states: Sequence[FunctionTable]) -> np.ndarray:
    """Pairwise inner products under the plain measure, by the grid's composite rule."""
    if not states:
        return np.zeros((0, 0))
    grid = states[0].grid
    if any(state.grid != grid for state in states):
        raise DomainError("Gram matrix states must share one grid")
    size = len(states)
    gram = np.empty((size, size))
    for i in range(size):
        for j in range(i, size):
            gram[i, j] = gram[j, i] = integrate_table(states[i].values * states[j].values, grid)
    return gram


def fit_proportionality(a: FunctionTable, b: FunctionTable, mask: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """Least-squares kappa with a ~ kappa b, and max |a - kappa b| / max |a| over the kept nodes."""
    keep = slice(None) if mask is None else np.asarray(mask, dtype=bool)
    x, y = b.values[keep], a.values[keep]
    denominator = float(np.dot(x, x))
    if denominator == 0.0:
        raise DomainError(f"Cannot fit against the zero function {b.label!r}")
    kappa = float(np.dot(x, y)) / denominator
    peak = float(np.max(np.abs(y)))
    return kappa, float(np.max(np.abs(y - kappa * x))) / peak if peak else 0.0


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    """One named comparison of a measured value against a threshold."""
    name: str
    value: float
    threshold: float
    above: bool = False

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.value):
            return False
        return self.value > self.threshold if self.above else self.value < self.threshold

    def to_dict(self) -> Dict[str, object]:
        return {'name': self.name, 'value': self.value, 'threshold': self.threshold, 'pass': self.passed}


@dataclass
class VerificationReport:
    """Checks, spectra and norm measurements of one verification run."""
    params: Dict[str, object] = field(default_factory=dict)
    grid: Dict[str, object] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)
    checks: List[CheckResult] = field(default_factory=list)
    spectra: Dict[str, Dict[str, object]] = field(default_factory=dict)
    norms: Dict[str, float] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def add(self, name: str, value: float, threshold: float, above: bool = False) -> CheckResult:
        check = CheckResult(name=name, value=float(value), threshold=float(threshold), above=above)
        self.checks.append(check)
        if not check.passed:
            logger.warning(f"Check failed: {name} value={value:.3e} threshold={threshold:.3e}")
        return check

    def extend(self, checks: Sequence[CheckResult]) -> None:
        for check in checks:
            self.add(check.name, check.value, check.threshold, check.above)

    def add_spectrum(self, name: str, spectrum: Spectrum) -> None:
        self.spectra[name] = spectrum.to_dict()

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failed_checks(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]

    def to_dict(self) -> Dict[str, object]:
        return {
            'params': self.params,
            'grid': self.grid,
            'tolerances': self.tolerances,
            'checks': [check.to_dict() for check in self.checks],
            'spectra': self.spectra,
            'norms': self.norms,
            'notes': self.notes,
            'pass': self.passed,
        }


def compare_spectra(numeric: Spectrum, reference: Sequence[float], tolerance: float, name: str) -> List[CheckResult]:
    """Level-by-level comparison in sorted order; a level missing on either side is a failed check."""
    checks = []
    values = numeric.energies
    for index, expected in enumerate(reference):
        if index < len(values):
            error = abs(values[index] - expected)
        else:
            error = math.inf
        checks.append(CheckResult(name=f'{name}.level[{index}]', value=error, threshold=tolerance))
    return checks


def absent_level_check(numeric: Spectrum, absent: float, window: float, name: str) -> CheckResult:
    """Distance from the absent level to the nearest numeric level, required to exceed window."""
    distance = min((abs(value - absent) for value in numeric.energies), default=math.inf)
    return CheckResult(name=name, value=distance, threshold=window, above=True)
