"""
The undeformed radial Hydrogen-like problem in dimensionless units.

H_l = -d^2/dr^2 + l(l+1)/r^2 - 2/r has bound levels E = -1/n^2 with
n = l + k, k >= 1. Radial functions are psi(r) = r R(r), normalized under
the plain measure dr.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Tuple, Union

import numpy as np

from .numerics import ArrayLike, DomainError, FunctionTable, Grid

logger = logging.getLogger(__name__)


def _check_l(l: int, minimum: int = 0) -> int:
    if isinstance(l, bool) or int(l) != l or l < minimum:
        raise DomainError(f"Angular index l must be an integer >= {minimum}, got {l!r}")
    return int(l)


@dataclass(frozen=True)
class QuantumNumbers:
    """Azimuthal number l, radial label k and principal number n = l + k."""
    l: int
    k: int

    def __post_init__(self):
        _check_l(self.l)
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise DomainError(f"Radial label k must be an integer >= 1, got {self.k!r}")

    @property
    def n(self) -> int:
        return self.l + self.k

    @classmethod
    def from_n(cls, n: int, l: int) -> 'QuantumNumbers':
        if n <= l:
            raise DomainError(f"Principal number n={n} must exceed l={l}")
        return cls(l=l, k=n - l)


class SpectrumSource(str, Enum):
    ANALYTIC = 'analytic'
    NUMERIC = 'numeric'


@dataclass
class Spectrum:
    """Ordered bound-state energies with labels and provenance."""
    entries: List[Tuple[str, float]]
    source: SpectrumSource = SpectrumSource.ANALYTIC
    notes: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self.source = SpectrumSource(self.source)
        energies = [energy for _, energy in self.entries]
        if any(b <= a for a, b in zip(energies, energies[1:])):
            raise DomainError(f"Spectrum energies must be strictly increasing, got {energies}")
        if self.source is SpectrumSource.ANALYTIC and any(energy >= 0 for energy in energies):
            raise DomainError("Analytic spectra hold bound states only (negative energies)")

    @property
    def energies(self) -> List[float]:
        return [energy for _, energy in self.entries]

    @property
    def labels(self) -> List[str]:
        return [label for label, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def to_dict(self) -> Dict[str, object]:
        return {
            'source': self.source.value,
            'levels': [{'label': label, 'energy': energy} for label, energy in self.entries],
            **({'notes': self.notes} if self.notes else {}),
        }


def potential_v(l: int, r: ArrayLike) -> ArrayLike:
    """V_l(r) = l(l+1)/r^2 - 2/r."""
    l = _check_l(l)
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise DomainError("The radial potential is defined for r > 0 only")
    value = l * (l + 1) / r_arr ** 2 - 2.0 / r_arr
    return float(value) if r_arr.ndim == 0 else value


def potential_table(l: int, grid: Grid) -> FunctionTable:
    """V_l on a grid with its exact first and second derivatives."""
    r = grid.nodes
    centrifugal = l * (l + 1)
    return FunctionTable(
        grid=grid,
        values=potential_v(l, r),
        d1=-2.0 * centrifugal / r ** 3 + 2.0 / r ** 2,
        d2=6.0 * centrifugal / r ** 4 - 4.0 / r ** 3,
        label=f'V_{l}',
    )


def energy(l: int, k: int) -> float:
    """E_lk = -1/(l+k)^2."""
    numbers = QuantumNumbers(l=l, k=k)
    return -1.0 / numbers.n ** 2


def hydrogen_spectrum(l: int, k_max: int) -> Spectrum:
    """Analytic levels E_l1 < ... < E_l,k_max."""
    if k_max < 1:
        raise DomainError(f"k_max must be >= 1, got {k_max}")
    return Spectrum(
        entries=[(f'E({l},{k})', energy(l, k)) for k in range(1, k_max + 1)],
        source=SpectrumSource.ANALYTIC,
    )


def laguerre(m: int, alpha: float, x: ArrayLike) -> ArrayLike:
    """
    Associated Laguerre polynomial L_m^alpha(x) by the three-term recurrence
    (k+1) L_{k+1} = (2k+1+alpha-x) L_k - (k+alpha) L_{k-1}.
    """
    if isinstance(m, bool) or int(m) != m or m < 0:
        raise DomainError(f"Laguerre degree must be a nonnegative integer, got {m!r}")
    x_arr = np.asarray(x, dtype=float)
    previous = np.ones_like(x_arr)
    if m == 0:
        return float(previous) if x_arr.ndim == 0 else previous
    current = 1.0 + alpha - x_arr
    for k in range(1, int(m)):
        previous, current = current, ((2 * k + 1 + alpha - x_arr) * current - (k + alpha) * previous) / (k + 1)
    return float(current) if x_arr.ndim == 0 else current


def closed_form_constant(n: int, l: int) -> float:
    """Normalization of r R_nl in Bohr units: sqrt((2/n)^3 (n-l-1)! / (2n (n+l)!)) (2/n)^l."""
    log_constant = 0.5 * (3 * math.log(2.0 / n) + math.lgamma(n - l) - math.log(2 * n) - math.lgamma(n + l + 1))
    return math.exp(log_constant + l * math.log(2.0 / n))


def _radial_values(n: int, l: int, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Closed-form psi_nl and its derivative at r."""
    m = n - l - 1
    x = 2.0 * r / n
    envelope = np.exp((l + 1) * np.log(r) - r / n) * closed_form_constant(n, l)
    poly = laguerre(m, 2 * l + 1, x)
    poly_prime = -laguerre(m - 1, 2 * l + 2, x) * (2.0 / n) if m >= 1 else np.zeros_like(r)
    values = envelope * poly
    slope = values * ((l + 1) / r - 1.0 / n) + envelope * poly_prime
    return values, slope


def radial_eigenfunction(n: int, l: int, grid: Grid) -> FunctionTable:
    """
    Normalized bound state psi_nl on the grid, positive as r -> 0+.

    d1 is the exact derivative; d2 follows from psi'' = (V_l - E) psi.
    The closed-form constant is divided by the norm measured on the grid,
    so the table has unit norm on the grid itself.
    """
    numbers = QuantumNumbers.from_n(n, _check_l(l))
    r = grid.nodes
    values, slope = _radial_values(n, l, r)
    table = FunctionTable(grid=grid, values=values, label=f'psi({n},{l})')
    measured = table.norm()
    if measured == 0.0:
        raise DomainError(f"psi({n},{l}) vanishes on the grid [{grid.r_min}, {grid.r_max}]")
    level = energy(l, numbers.k)
    logger.debug(f"psi({n},{l}): closed-form norm on grid {measured:.12f}")
    values = values / measured
    return FunctionTable(
        grid=grid,
        values=values,
        d1=slope / measured,
        d2=(potential_v(l, r) - level) * values,
        label=f'psi({n},{l})',
    )


def radial_eigenfunctions(l: int, n_values: Union[List[int], range], grid: Grid) -> List[FunctionTable]:
    return [radial_eigenfunction(n, l, grid) for n in n_values]
