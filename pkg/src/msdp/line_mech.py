"""Geographic privacy on the real line: Laplace noise plus optimal result offsets.

Noise density is ``(eps/2) * exp(-eps*|x|)``, so ``E|X| = 1/eps``. With k
results the optimal expected distance is ``2/(eps*(k+1))`` for odd k and
``log(1 + 2/k)/eps`` for even k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from .common import LINE, DisutilityFn, OffsetLike, OffsetSet, as_disutility, as_offsets
from .density import ExpSegment, PiecewiseExpDensity, normalize
from .errors import InvalidK, NonConvergent, NonPositiveDerivative, NonPositiveEpsilon
from .quadrature import adaptive_simpson
from scipy.optimize import brentq

GRID_POINTS = 200
S_MAX = 50.0
S_TOL = 1e-10
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not eps > 0 or not math.isfinite(eps):
        raise NonPositiveEpsilon(f"eps must be positive, got {eps}")
    return eps


def _check_k(k: int) -> int:
    if int(k) != k or k < 1:
        raise InvalidK(f"k must be a positive integer, got {k}")
    return int(k)


def laplace_density(eps: float) -> PiecewiseExpDensity:
    eps = _check_eps(eps)
    half = math.log(eps / 2.0)
    return normalize([ExpSegment(-math.inf, 0.0, half, eps), ExpSegment(0.0, math.inf, half, -eps)], LINE)


def optimal_offsets_closed(eps: float, k: int) -> OffsetSet:
    eps, k = _check_eps(eps), _check_k(k)
    if k % 2:
        t = (k - 1) // 2
        pos = [2.0 * math.log((t + 1) / j) / eps for j in range(t, 0, -1)]
        return OffsetSet([-x for x in pos] + [0.0] + pos)
    t = k // 2
    inner = math.log1p(2.0 / k) / eps
    pos = [inner]
    for i in range(t - 1, 0, -1):
        pos.append(pos[-1] + 2.0 * math.log1p(1.0 / i) / eps)
    return OffsetSet([-x for x in pos] + pos)


def closed_form_cost(eps: float, k: int) -> float:
    eps, k = _check_eps(eps), _check_k(k)
    if k % 2:
        return 2.0 / (eps * (k + 1))
    return math.log1p(2.0 / k) / eps


@dataclass(frozen=True)
class RecurrenceState:
    """Conditional costs and gaps of the one-sided recurrence, in units of 1/eps.

    ``D[j-1]`` is the expected cost for an exponential user value with ``j``
    one-sided results (including the one at 0); ``s_gaps[j-1]`` is the step that
    takes ``D[j-1]`` to ``D[j]``.
    """

    b: int
    D: Tuple[float, ...]
    s_gaps: Tuple[float, ...]


def _golden_min(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _grid_then_golden(f: Callable[[float], float], s_max: float,
                      df: Callable[[float], float] = None) -> float:
    """Minimize ``f`` on (0, s_max]: log grid, golden section, then an optional
    root polish of the derivative ``df`` inside the grid bracket.

    Golden section on function values alone stalls near sqrt(machine eps) in
    the argument; the derivative root is what reaches ~1e-14.
    """
    grid = np.geomspace(s_max * 1e-8, s_max, GRID_POINTS)
    vals = [f(float(s)) for s in grid]
    i = int(np.argmin(vals))
    if i == 0 or i == len(grid) - 1:
        raise NonConvergent(f"no interior minimum on (0, {s_max}]: best grid point {grid[i]:.3g}")
    lo, hi = float(grid[i - 1]), float(grid[i + 1])
    s = _golden_min(f, lo, hi, S_TOL)
    if df is not None:
        dlo, dhi = df(lo), df(hi)
        if dlo < 0 < dhi:
            s = brentq(df, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return s


class _UnitCosts:
    """Integrals of h(t/eps) against exp(-t), the building blocks of the recurrence."""

    def __init__(self, h: DisutilityFn, eps: float):
        self.identity = h.is_identity
        self.eps = eps
        fn = h.fn
        self.g = lambda t: float(fn(t / eps))

    def tail(self) -> float:
        """Integral over [0, inf) of g(t) e^-t: the cost with a single result at 0."""
        if self.identity:
            return 1.0 / self.eps
        return adaptive_simpson(lambda t: self.g(t) * math.exp(-t), 0.0, S_MAX + 20.0)

    def between(self, s: float) -> float:
        """Integral over [0, s] of min(g(t), g(s-t)) e^-t."""
        if self.identity:
            e = math.exp(-0.5 * s)
            return (1.0 - e) ** 2 / self.eps
        half = 0.5 * s
        g = self.g
        return (adaptive_simpson(lambda t: g(t) * math.exp(-t), 0.0, half)
                + adaptive_simpson(lambda t: g(s - t) * math.exp(-t), half, s))

    def approach(self, s: float) -> float:
        """Integral over [0, s] of g(s-t) e^-t: cost before the first result at s."""
        if self.identity:
            return (s - 1.0 + math.exp(-s)) / self.eps
        g = self.g
        return adaptive_simpson(lambda t: g(s - t) * math.exp(-t), 0.0, s)

    def rising(self, x: float) -> float:
        """Integral over [0, x] of g(u) e^u."""
        if self.identity:
            return ((x - 1.0) * math.exp(x) + 1.0) / self.eps
        g = self.g
        return adaptive_simpson(lambda u: g(u) * math.exp(u), 0.0, x)

    def between_slope(self, s: float, prev: float) -> float:
        """d/ds of between(s) + e^-s * prev."""
        half = 0.5 * s
        return self.g(half) * math.exp(-half) - math.exp(-s) * (self.rising(half) + prev)

    def approach_slope(self, s: float, inner: float) -> float:
        """d/ds of approach(s) + e^-s * inner."""
        return self.g(s) - math.exp(-s) * (self.rising(s) + inner)


def recurrence_states(eps: float, b: int, h: DisutilityFn = None) -> RecurrenceState:
    """Run the memoryless recurrence for ``b`` one-sided results."""
    eps = _check_eps(eps)
    h = as_disutility(h)
    unit = _UnitCosts(h, eps)
    D = [unit.tail()]
    gaps = []
    for _ in range(1, b):
        prev = D[-1]
        step = lambda s, prev=prev: unit.between(s) + math.exp(-s) * prev
        s = _grid_then_golden(step, S_MAX, lambda s, prev=prev: unit.between_slope(s, prev))
        gaps.append(s)
        D.append(step(s))
    return RecurrenceState(b, tuple(D), tuple(gaps))


def optimal_offsets_recurrence(eps: float, k: int, h: DisutilityFn = None) -> Tuple[OffsetSet, float]:
    """Optimal offsets for Laplace noise under a general disutility.

    Works with unit-rate noise and the rescaled disutility ``h(t/eps)``, then
    maps positions back by ``1/eps``. Odd k places a result at 0 and unrolls the
    one-sided gaps outward; even k optimizes the innermost half-gap on top of
    the odd recurrence for ``k/2`` results.
    """
    eps, k = _check_eps(eps), _check_k(k)
    h = as_disutility(h)
    if k % 2:
        b = (k + 1) // 2
        state = recurrence_states(eps, b, h)
        pos = []
        y = 0.0
        for s in reversed(state.s_gaps):
            y += s
            pos.append(y)
        unit_offsets = [-x for x in pos] + [0.0] + pos
        return OffsetSet(np.asarray(unit_offsets) / eps), state.D[-1]

    b = k // 2
    state = recurrence_states(eps, b, h)
    unit = _UnitCosts(h, eps)
    inner_cost = state.D[-1]
    total = lambda s0: unit.approach(s0) + math.exp(-s0) * inner_cost
    s0 = _grid_then_golden(total, S_MAX, lambda s: unit.approach_slope(s, inner_cost))
    pos = [s0]
    for s in reversed(state.s_gaps):
        pos.append(pos[-1] + s)
    unit_offsets = [-x for x in pos] + pos
    return OffsetSet(np.asarray(unit_offsets) / eps), total(s0)


@dataclass(frozen=True)
class MedianReport:
    midpoints: Tuple[float, ...]
    residuals: Tuple[float, ...]

    @property
    def max_abs_residual(self) -> float:
        return max(abs(r) for r in self.residuals)


def median_condition(d: PiecewiseExpDensity, A: OffsetLike) -> MedianReport:
    """Mass left of each offset minus mass right of it, within its Voronoi cell."""
    xs = as_offsets(A).offsets
    mids = [0.5 * (a + b) for a, b in zip(xs[:-1], xs[1:])]
    bounds = [-math.inf] + mids + [math.inf]
    res = []
    for i, x in enumerate(xs):
        left = d.mass_between(bounds[i], x)
        right = d.mass_between(x, bounds[i + 1])
        res.append((left - right) / d.total_mass)
    return MedianReport(tuple(mids), tuple(res))


def effective_epsilon(g_prime_at_zero: float) -> float:
    """Privacy budget of the Laplace mechanism that is optimal for a convex
    distance-dependent budget g: its slope at zero."""
    g0 = float(g_prime_at_zero)
    if not g0 > 0:
        raise NonPositiveDerivative(f"g'(0) must be positive, got {g0}")
    return g0


def line_summary(eps: float, k: int, h=None, method: str = "closed") -> dict:
    """Structured result used by the CLI ``line`` subcommand."""
    h = as_disutility(h)
    if method == "closed":
        if not h.is_identity:
            raise ValueError("the closed form is only valid for identity disutility")
        offsets = optimal_offsets_closed(eps, k)
        cost = closed_form_cost(eps, k)
    elif method == "recurrence":
        offsets, cost = optimal_offsets_recurrence(eps, k, h)
    else:
        raise ValueError(f"unknown method {method!r}")
    med = median_condition(laplace_density(eps), offsets)
    return {
        "eps": eps,
        "k": k,
        "h": h.tag,
        "offsets": list(offsets.offsets),
        "cost": cost,
        "method": method,
        "median_residual_max": med.max_abs_residual,
    }
