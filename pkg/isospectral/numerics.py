"""
Numerical kernels shared by every construction in the app.

Grids, tabulated functions, the integer-order incomplete gamma function,
adaptive quadrature, stencil differentiation, table quadrature and the
Numerov stepper for u'' = (V(r) - E) u.
"""
import logging
import math
from dataclasses import dataclass, fields, replace
from enum import Enum
from functools import cached_property
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import integrate

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class IsohydraError(Exception):
    """Base class for errors raised by the isospectral app."""


class DomainError(IsohydraError, ValueError):
    """Raised when an argument lies outside its documented domain."""


class NonConvergence(IsohydraError):
    """Raised when adaptive quadrature exhausts its subdivision limit."""

    def __init__(self, message: str, worst_interval: Optional[Tuple[float, float]] = None):
        super().__init__(message)
        self.worst_interval = worst_interval


class GridTooCoarse(IsohydraError):
    """Raised when a stencil needs more nodes than a grid segment provides."""


class GridScheme(str, Enum):
    UNIFORM = 'uniform'
    LOG_THEN_UNIFORM = 'log-then-uniform'
    LOG = 'log'


@dataclass(frozen=True)
class Segment:
    """A run of nodes equally spaced in a natural coordinate (ln r or r)."""
    start: int
    stop: int
    logarithmic: bool
    step: float

    @property
    def size(self) -> int:
        return self.stop - self.start

    def jacobian(self, r: np.ndarray) -> np.ndarray:
        """dr/dxi on the segment nodes."""
        return r if self.logarithmic else np.ones_like(r)


@dataclass(frozen=True)
class Grid:
    """Discretized radial domain."""
    r_min: float
    r_max: float
    n_points: int
    scheme: GridScheme = GridScheme.LOG_THEN_UNIFORM

    def __post_init__(self):
        object.__setattr__(self, 'scheme', GridScheme(self.scheme))
        if not (0.0 < self.r_min < self.r_max):
            raise DomainError(f"Grid needs 0 < r_min < r_max, got r_min={self.r_min}, r_max={self.r_max}")
        if int(self.n_points) != self.n_points or self.n_points < 16:
            raise DomainError(f"Grid needs at least 16 points, got {self.n_points}")
        object.__setattr__(self, 'n_points', int(self.n_points))

    @classmethod
    def from_settings(cls, **overrides) -> 'Grid':
        """Default grid from the ISOHYDRA settings group."""
        from django.conf import settings
        defaults = getattr(settings, 'ISOHYDRA', {})
        values = {
            'r_min': defaults.get('R_MIN', 1e-6),
            'r_max': defaults.get('R_MAX', 60.0),
            'n_points': defaults.get('POINTS', 6000),
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    @classmethod
    def uniform(cls, r_min: float, r_max: float, step: float) -> 'Grid':
        """Uniform grid whose spacing is at most `step`."""
        n_points = max(16, int(math.ceil((r_max - r_min) / step)) + 1)
        return cls(r_min, r_max, n_points, GridScheme.UNIFORM)

    @cached_property
    def _layout(self) -> Tuple[np.ndarray, Tuple[Segment, ...]]:
        n = self.n_points
        scheme = self.scheme
        if scheme is GridScheme.LOG_THEN_UNIFORM:
            if self.r_min >= 1.0:
                scheme = GridScheme.UNIFORM
            elif self.r_max <= 1.0:
                scheme = GridScheme.LOG

        if scheme is GridScheme.UNIFORM:
            nodes = np.linspace(self.r_min, self.r_max, n)
            segments = (Segment(0, n, False, (self.r_max - self.r_min) / (n - 1)),)
        elif scheme is GridScheme.LOG:
            xi = np.linspace(math.log(self.r_min), math.log(self.r_max), n)
            nodes = np.exp(xi)
            segments = (Segment(0, n, True, xi[1] - xi[0]),)
        else:
            # The ln r step below 1 matches the r step above it, so the spacing is continuous at r = 1.
            log_span = -math.log(self.r_min)
            linear_span = self.r_max - 1.0
            n_log = max(1, int(round((n - 1) * log_span / (log_span + linear_span))))
            n_log = min(n_log, n - 2)
            n_linear = n - 1 - n_log
            log_part = np.exp(np.linspace(math.log(self.r_min), 0.0, n_log + 1))[:-1]
            linear_part = np.linspace(1.0, self.r_max, n_linear + 1)
            nodes = np.concatenate([log_part, linear_part])
            segments = (
                Segment(0, n_log + 1, True, log_span / n_log),
                Segment(n_log, n, False, linear_span / n_linear),
            )
        nodes[0] = self.r_min
        nodes[-1] = self.r_max
        nodes.setflags(write=False)
        return nodes, segments

    @property
    def nodes(self) -> np.ndarray:
        return self._layout[0]

    def segments(self) -> Tuple[Segment, ...]:
        """Natural-coordinate segments; neighbouring segments share their junction node."""
        return self._layout[1]

    @property
    def is_uniform(self) -> bool:
        segments = self.segments()
        return len(segments) == 1 and not segments[0].logarithmic

    def index_at(self, r: float) -> int:
        """Index of the first node at or beyond r."""
        return int(np.searchsorted(self.nodes, r, side='left'))

    def to_dict(self) -> Dict[str, object]:
        return {
            'r_min': self.r_min,
            'r_max': self.r_max,
            'n_points': self.n_points,
            'scheme': self.scheme.value,
        }


@dataclass(frozen=True, eq=False)
class FunctionTable:
    """Values (and optionally first and second derivatives) of a function on a Grid."""
    grid: Grid
    values: np.ndarray
    d1: Optional[np.ndarray] = None
    d2: Optional[np.ndarray] = None
    log_scale: float = 0.0
    label: str = ''

    def __post_init__(self):
        for name in ('values', 'd1', 'd2'):
            array = getattr(self, name)
            if array is None:
                continue
            array = np.asarray(array, dtype=float)
            if array.shape != (self.grid.n_points,):
                raise DomainError(
                    f"FunctionTable.{name} has shape {array.shape}, expected ({self.grid.n_points},)"
                )
            object.__setattr__(self, name, array)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def with_derivatives(self, d1: Optional[np.ndarray] = None, d2: Optional[np.ndarray] = None) -> 'FunctionTable':
        return replace(
            self,
            d1=self.d1 if d1 is None else d1,
            d2=self.d2 if d2 is None else d2,
        )

    def scaled(self, factor: float, label: Optional[str] = None) -> 'FunctionTable':
        return FunctionTable(
            grid=self.grid,
            values=self.values * factor,
            d1=None if self.d1 is None else self.d1 * factor,
            d2=None if self.d2 is None else self.d2 * factor,
            label=self.label if label is None else label,
        )

    def norm(self) -> float:
        """L2 norm under the plain measure dr."""
        return math.sqrt(integrate_table(self.values ** 2, self.grid))

    def normalized(self, label: Optional[str] = None) -> 'FunctionTable':
        """Unit-norm copy, signed to be positive at the first significant node."""
        norm = self.norm()
        if norm == 0.0:
            raise DomainError(f"Cannot normalize the zero function {self.label!r}")
        threshold = 1e-8 * np.max(np.abs(self.values))
        first = int(np.argmax(np.abs(self.values) > threshold))
        sign = 1.0 if self.values[first] >= 0 else -1.0
        return self.scaled(sign / norm, label=label)

    def max_abs(self, mask: Optional[np.ndarray] = None) -> float:
        values = self.values if mask is None else self.values[mask]
        return float(np.max(np.abs(values))) if values.size else 0.0


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical tolerances used across the app."""
    quad_tol: float = 1e-10
    ode_tol: float = 1e-10
    residual_tol: float = 1e-6
    fd_step_scale: float = 1e-4
    pole_margin: float = 0.1
    level_tol: float = 2e-4
    cross_method_tol: float = 1e-5

    def __post_init__(self):
        for item in fields(self):
            value = getattr(self, item.name)
            if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
                raise DomainError(f"Tolerance {item.name} must be a positive real, got {value!r}")
        if self.quad_tol > 1e-6:
            raise DomainError(f"quad_tol must not exceed 1e-6, got {self.quad_tol}")
        if self.pole_margin >= 0.5:
            raise DomainError(f"pole_margin must be below 0.5, got {self.pole_margin}")

    @classmethod
    def from_settings(cls) -> 'ToleranceConfig':
        from django.conf import settings
        defaults = getattr(settings, 'ISOHYDRA', {})
        mapping = {
            'quad_tol': 'QUAD_TOL',
            'ode_tol': 'ODE_TOL',
            'residual_tol': 'RESIDUAL_TOL',
            'fd_step_scale': 'FD_STEP_SCALE',
            'pole_margin': 'POLE_MARGIN',
            'level_tol': 'LEVEL_TOL',
            'cross_method_tol': 'CROSS_METHOD_TOL',
        }
        return cls(**{name: float(defaults[key]) for name, key in mapping.items() if key in defaults})

    def with_overrides(self, overrides: Dict[str, float]) -> 'ToleranceConfig':
        known = {item.name for item in fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise DomainError(f"Unknown tolerance key(s) {', '.join(unknown)}; known keys: {', '.join(sorted(known))}")
        return replace(self, **{key: float(value) for key, value in overrides.items()})

    def to_dict(self) -> Dict[str, float]:
        return {item.name: getattr(self, item.name) for item in fields(self)}


# ---------------------------------------------------------------------------
# Incomplete gamma function
# ---------------------------------------------------------------------------

def _check_gamma_order(a: int) -> int:
    if isinstance(a, bool) or int(a) != a or a < 1:
        raise DomainError(f"Incomplete gamma order must be a positive integer, got {a!r}")
    return int(a)


def _neumaier_sum(terms: List[np.ndarray]) -> np.ndarray:
    """Compensated summation, elementwise over arrays."""
    total = np.zeros_like(terms[0])
    compensation = np.zeros_like(terms[0])
    for term in terms:
        t = total + term
        big = np.abs(total) >= np.abs(term)
        compensation += np.where(big, (total - t) + term, (term - t) + total)
        total = t
    return total + compensation


def _upper_finite_sum(a: int, x: np.ndarray) -> np.ndarray:
    """Q(a, x) = e^{-x} sum_{m<a} x^m/m! for x > 0."""
    log_x = np.log(x)
    terms = [np.exp(-x + m * log_x - math.lgamma(m + 1)) for m in range(a)]
    return _neumaier_sum(terms)


def _lower_series(a: int, x: np.ndarray) -> np.ndarray:
    """P(a, x) = e^{-x} x^a/a! * sum_k x^k/((a+1)...(a+k)), convergent and cancellation-free for x < a."""
    with np.errstate(divide='ignore'):
        prefactor = np.exp(-x + a * np.log(x) - math.lgamma(a + 1))
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 400):
        term = term * x / (a + k)
        total = total + term
        if np.all(term <= 1e-17 * total):
            break
    return prefactor * total


def regularized_lower_gamma(a: int, x: ArrayLike) -> ArrayLike:
    """
    Regularized lower incomplete gamma function P(a, x) for integer a.

    Args:
        a: Positive integer order
        x: Nonnegative argument (scalar or array); +inf is allowed

    Returns:
        P(a, x) in [0, 1], with the same shape as x
    """
    a = _check_gamma_order(a)
    x_arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(x_arr)) or np.any(x_arr < 0):
        raise DomainError("Incomplete gamma argument must be nonnegative")
    flat = np.atleast_1d(x_arr).astype(float)
    result = np.empty_like(flat)
    infinite = np.isinf(flat)
    small = (flat < a) & ~infinite
    large = ~small & ~infinite
    result[infinite] = 1.0
    if np.any(small):
        result[small] = _lower_series(a, flat[small])
    if np.any(large):
        result[large] = 1.0 - _upper_finite_sum(a, flat[large])
    result = np.clip(result, 0.0, 1.0)
    if x_arr.ndim == 0:
        return float(result[0])
    return result.reshape(x_arr.shape)


def regularized_upper_gamma(a: int, x: ArrayLike) -> ArrayLike:
    """Q(a, x) = 1 - P(a, x), computed directly where P would round to 1."""
    a = _check_gamma_order(a)
    x_arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(x_arr)) or np.any(x_arr < 0):
        raise DomainError("Incomplete gamma argument must be nonnegative")
    flat = np.atleast_1d(x_arr).astype(float)
    result = np.empty_like(flat)
    small = flat < a
    if np.any(small):
        result[small] = 1.0 - _lower_series(a, flat[small])
    if np.any(~small):
        with np.errstate(invalid='ignore'):
            upper = _upper_finite_sum(a, flat[~small])
        result[~small] = np.where(np.isinf(flat[~small]), 0.0, upper)
    if x_arr.ndim == 0:
        return float(result[0])
    return result.reshape(x_arr.shape)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def adaptive_quad(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10,
                  max_depth: int = 60) -> float:
    """
    Adaptive Gauss-Kronrod quadrature of f over [a, b] (b may be +inf).

    Args:
        f: Integrand, finite on [a, b]
        a: Lower limit
        b: Upper limit, a < b
        tol: Target absolute error
        max_depth: Maximum number of subintervals

    Returns:
        The integral estimate

    Raises:
        NonConvergence: if the error target is not met within max_depth subdivisions
    """
    if not a < b:
        raise DomainError(f"adaptive_quad needs a < b, got a={a}, b={b}")
    output = integrate.quad(f, a, b, epsabs=tol, epsrel=0.0, limit=max_depth, full_output=1)
    value, error, info = output[0], output[1], output[2]
    if len(output) > 3 or error > tol:
        last = int(info.get('last', 0)) if isinstance(info, dict) else 0
        worst = None
        if last and 'elist' in info:
            index = int(np.argmax(info['elist'][:last]))
            worst = (float(info['alist'][index]), float(info['blist'][index]))
        raise NonConvergence(
            f"Quadrature on [{a}, {b}] did not reach tol={tol:g} (estimated error {error:.3g}) "
            f"within {max_depth} subdivisions; worst subinterval {worst}",
            worst_interval=worst,
        )
    return float(value)


def integrate_table(values: Union[np.ndarray, FunctionTable], grid: Optional[Grid] = None) -> float:
    """Composite Simpson rule over the whole grid, applied in each segment's natural coordinate."""
    if isinstance(values, FunctionTable):
        grid, values = values.grid, values.values
    r = grid.nodes
    total = 0.0
    for segment in grid.segments():
        part = slice(segment.start, segment.stop)
        integrand = values[part] * segment.jacobian(r[part])
        total += float(integrate.simpson(integrand, dx=segment.step))
    return total


def cumulative_integral(table: FunctionTable, anchor_index: int = 0) -> np.ndarray:
    """Running integral of the table from the node at anchor_index to every node."""
    r = table.grid.nodes
    running = np.zeros_like(table.values)
    offset = 0.0
    for segment in table.grid.segments():
        part = slice(segment.start, segment.stop)
        integrand = table.values[part] * segment.jacobian(r[part])
        piece = integrate.cumulative_simpson(integrand, dx=segment.step, initial=0.0)
        running[part] = offset + piece
        offset = running[segment.stop - 1]
    return running - running[anchor_index]


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------

def _stencil_derivative(f: np.ndarray, h: float, order: int) -> np.ndarray:
    """Fourth-order derivative of equally spaced samples: Richardson-extrapolated central differences inside, one-sided at the ends."""
    n = f.size
    out = np.empty_like(f)
    if order == 1:
        central_h = (f[3:-1] - f[1:-3]) / (2 * h)
        central_2h = (f[4:] - f[:-4]) / (4 * h)
        out[2:-2] = (4 * central_h - central_2h) / 3
        out[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
        out[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
        out[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
        out[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
        return out

    central_h = (f[3:-1] - 2 * f[2:-2] + f[1:-3]) / h ** 2
    central_2h = (f[4:] - 2 * f[2:-2] + f[:-4]) / (4 * h ** 2)
    out[2:-2] = (4 * central_h - central_2h) / 3
    if n >= 6:
        out[0] = (45 * f[0] - 154 * f[1] + 214 * f[2] - 156 * f[3] + 61 * f[4] - 10 * f[5]) / (12 * h ** 2)
        out[1] = (10 * f[0] - 15 * f[1] - 4 * f[2] + 14 * f[3] - 6 * f[4] + f[5]) / (12 * h ** 2)
        out[-1] = (45 * f[-1] - 154 * f[-2] + 214 * f[-3] - 156 * f[-4] + 61 * f[-5] - 10 * f[-6]) / (12 * h ** 2)
        out[-2] = (10 * f[-1] - 15 * f[-2] - 4 * f[-3] + 14 * f[-4] - 6 * f[-5] + f[-6]) / (12 * h ** 2)
    else:
        second = np.gradient(np.gradient(f, h, edge_order=2), h, edge_order=2)
        out[[0, 1, -2, -1]] = second[[0, 1, -2, -1]]
    return out


def differentiate(table: FunctionTable, order: int = 1) -> FunctionTable:
    """
    Stencil derivative of a tabulated function.

    Each grid segment is differentiated in its natural coordinate and the
    chain rule maps the result back to d/dr; shared junction nodes take the
    value from the outer segment.

    Returns:
        A copy of the table with d1 (order 1) or d2 (order 2) populated
    """
    if order not in (1, 2):
        raise DomainError(f"differentiate supports order 1 or 2, got {order}")
    r = table.grid.nodes
    out = np.empty_like(table.values)
    for segment in table.grid.segments():
        if segment.size < 5:
            raise GridTooCoarse(
                f"Grid segment starting at r={r[segment.start]:.3g} has {segment.size} nodes; at least 5 are needed"
            )
        part = slice(segment.start, segment.stop)
        f = table.values[part]
        first = _stencil_derivative(f, segment.step, 1)
        if segment.logarithmic:
            rr = r[part]
            if order == 1:
                out[part] = first / rr
            else:
                out[part] = (_stencil_derivative(f, segment.step, 2) - first) / rr ** 2
        else:
            out[part] = first if order == 1 else _stencil_derivative(f, segment.step, 2)
    if order == 1:
        return table.with_derivatives(d1=out)
    return table.with_derivatives(d2=out)


def scalar_derivative(f: Callable[[float], float], x: float, step_scale: float = 1e-4) -> float:
    """Richardson-extrapolated central difference of a scalar function."""
    h = step_scale * max(1.0, abs(x))
    coarse = (f(x + 2 * h) - f(x - 2 * h)) / (4 * h)
    fine = (f(x + h) - f(x - h)) / (2 * h)
    return (4 * fine - coarse) / 3


def derivative_at(values: np.ndarray, grid: Grid, index: int) -> float:
    """d/dr of tabulated values at one node, from the five nearest nodes of its segment."""
    r = grid.nodes
    for segment in reversed(grid.segments()):
        if segment.start <= index < segment.stop and segment.size >= 5:
            break
    else:
        raise GridTooCoarse(f"No segment with 5 nodes contains index {index}")
    lo = min(max(index - 2, segment.start), segment.stop - 5)
    window = np.asarray(values[lo:lo + 5], dtype=float)
    slope = _stencil_derivative(window, segment.step, 1)[index - lo]
    return float(slope / r[index]) if segment.logarithmic else float(slope)


def relative_residual(residual: np.ndarray, *terms: np.ndarray) -> float:
    """Largest nodewise residual relative to the summed magnitude of the terms that produced it."""
    scale = np.zeros_like(residual)
    for term in terms:
        scale = scale + np.abs(term)
    scale = np.where(scale > 0, scale, 1.0)
    return float(np.max(np.abs(residual) / scale)) if residual.size else 0.0


def scaled_residual(residual: np.ndarray, *terms: np.ndarray) -> float:
    """Largest residual relative to the largest summed magnitude of the terms; 0 when every term vanishes."""
    if residual.size == 0:
        return 0.0
    scale = np.zeros_like(residual)
    for term in terms:
        scale = scale + np.abs(term)
    peak = float(np.max(scale))
    if peak == 0.0:
        return float(np.max(np.abs(residual)))
    return float(np.max(np.abs(residual)) / peak)


# ---------------------------------------------------------------------------
# Numerov stepper
# ---------------------------------------------------------------------------

OVERFLOW_THRESHOLD = 1e100


class Direction(str, Enum):
    FORWARD = 'forward'
    BACKWARD = 'backward'


def _taylor_second_value(y0: float, slope: float, f: np.ndarray, h: float) -> float:
    """
    Value one step h away from (y0, slope) for y'' = F y.

    F is sampled along the stepping direction, and slope is the derivative
    along that same direction.
    """
    f_arr = np.asarray(f, dtype=float)
    if f_arr.size >= 6:
        df = _stencil_derivative(f_arr, h, 1)[0]
        ddf = _stencil_derivative(f_arr, h, 2)[0]
    else:
        df = ddf = 0.0
    f0 = f_arr[0]
    y2 = f0 * y0
    y3 = df * y0 + f0 * slope
    y4 = ddf * y0 + 2 * df * slope + f0 * f0 * y0
    return y0 + h * slope + h ** 2 / 2 * y2 + h ** 3 / 6 * y3 + h ** 4 / 24 * y4


def _numerov_run(coefficient: List[float], h: float, y0: float, y1: float,
                 store: Callable[[int, float], None], rescale: Callable[[float], None]) -> Tuple[float, float]:
    """March y'' = F y over equally spaced samples F; returns the last two values."""
    c = [1.0 - h * h * value / 12.0 for value in coefficient]
    prev, curr = y0, y1
    store(0, prev)
    store(1, curr)
    for i in range(1, len(c) - 1):
        nxt = ((12.0 - 10.0 * c[i]) * curr - c[i - 1] * prev) / c[i + 1]
        if abs(nxt) > OVERFLOW_THRESHOLD:
            factor = abs(nxt)
            rescale(factor)
            prev, curr, nxt = prev / factor, curr / factor, nxt / factor
        store(i + 1, nxt)
        prev, curr = curr, nxt
    return prev, curr


def ode_integrate_schrodinger(V: FunctionTable, energy: float, init_value: float, init_slope: float,
                              direction: Union[Direction, str] = Direction.FORWARD,
                              start_index: Optional[int] = None, stop_index: Optional[int] = None,
                              next_value: Optional[float] = None) -> FunctionTable:
    """
    Numerov solution of u'' = (V(r) - E) u along the grid.

    Linear segments are stepped in r; logarithmic segments are stepped in
    xi = ln r on y = u / sqrt(r), which obeys y'' = [r^2 (V - E) + 1/4] y.
    Crossing a segment junction restarts the recurrence from the value there
    and a one-sided fourth-order slope.

    Args:
        V: Potential table on the integration grid
        energy: E
        init_value: u at the starting node
        init_slope: du/dr at the starting node
        direction: forward (increasing r) or backward
        start_index: Starting node (default: first node for forward, last for backward)
        stop_index: Last node to fill (default: the far end)
        next_value: u at the node after the start, replacing the Taylor start

    Returns:
        Table of u; nodes outside the integrated range hold NaN. log_scale
        records the natural log of the overflow renormalization applied.
    """
    direction = Direction(direction)
    grid = V.grid
    r = grid.nodes
    n = grid.n_points
    forward = direction is Direction.FORWARD
    if start_index is None:
        start_index = 0 if forward else n - 1
    if stop_index is None:
        stop_index = n - 1 if forward else 0
    if (forward and stop_index <= start_index) or (not forward and stop_index >= start_index):
        raise DomainError(f"Empty integration range {start_index}..{stop_index} for direction {direction.value}")

    u = np.full(n, np.nan)
    log_scale = 0.0
    step = 1 if forward else -1

    def rescale(factor: float) -> None:
        nonlocal log_scale
        u[:] = u / factor
        log_scale += math.log(factor)
        logger.debug(f"Numerov renormalized by {factor:.3g} at E={energy:.6g}")

    segments = list(grid.segments())
    if not forward:
        segments.reverse()

    value, slope = float(init_value), float(init_slope)
    position = start_index
    first_pair = next_value
    for segment in segments:
        lo, hi = segment.start, segment.stop - 1
        if forward and not (lo <= position < hi):
            continue
        if not forward and not (lo < position <= hi):
            continue
        end = min(hi, stop_index) if forward else max(lo, stop_index)
        indices = np.arange(position, end + step, step)
        rr = r[indices]
        potential = V.values[indices] - energy
        if segment.logarithmic:
            coefficient = rr ** 2 * potential + 0.25
            y0 = value / math.sqrt(rr[0])
            y_slope = (rr[0] * slope - value / 2.0) / math.sqrt(rr[0])
            back_transform = np.sqrt(rr)
        else:
            coefficient = potential
            y0 = value
            y_slope = slope
            back_transform = np.ones_like(rr)
        if indices.size < 2:
            break
        if first_pair is not None:
            y1 = first_pair / back_transform[1]
            first_pair = None
        else:
            y1 = _taylor_second_value(y0, y_slope * step, coefficient[:6], segment.step)

        def store(k: int, y: float, _indices=indices, _back=back_transform) -> None:
            u[_indices[k]] = y * _back[k]

        _numerov_run(coefficient.tolist(), segment.step, y0, y1, store, rescale)
        position = int(indices[-1])
        if position == stop_index:
            break
        # Hand over to the next segment: value and a one-sided slope at the junction.
        tail = u[indices[-5:]] / back_transform[-5:]
        tail_derivative = _stencil_derivative(tail, segment.step, 1)[-1] * step
        y_end = tail[-1]
        if segment.logarithmic:
            slope = (tail_derivative + y_end / 2.0) / math.sqrt(rr[-1])
        else:
            slope = tail_derivative
        value = u[position]

    return FunctionTable(grid=grid, values=u, log_scale=log_scale, label=f'u(E={energy:g})')
