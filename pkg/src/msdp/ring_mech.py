"""Mechanisms on the unit circle.

The local mechanism puts k equally spaced results on the ring and uses a two-level
density: high near each result, low elsewhere, with ratio e^eps. The geographic
study covers k=2 with a one-parameter family of Lipschitz log-densities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .common import RING, TWO_PI, OffsetSet
from .density import ExpSegment, PiecewiseExpDensity, expected_min_disutility, normalize
from .errors import InvalidK, NonPositiveEpsilon
from .line_mech import _GOLDEN

T_TOL = 1e-6


def _check(eps: float, k: int) -> Tuple[float, int]:
    eps = float(eps)
    if not eps > 0 or not math.isfinite(eps):
        raise NonPositiveEpsilon(f"eps must be positive, got {eps}")
    if int(k) != k or k < 1:
        raise InvalidK(f"k must be a positive integer, got {k}")
    return eps, int(k)


def local_beta(eps: float) -> float:
    return 1.0 / (2.0 * (math.exp(0.5 * eps) + 1.0))


@dataclass(frozen=True)
class RingMechanism:
    eps: float
    k: int
    beta: float
    cell: float
    density: PiecewiseExpDensity
    offsets: OffsetSet


def two_level_density(eps: float, k: int, beta: float) -> PiecewiseExpDensity:
    """Density equal to ``e^eps * c`` within ``beta*t`` of each ``j*t`` and ``c`` elsewhere."""
    t = TWO_PI / k
    w = beta * t
    if not 0 < w < 0.5 * t:
        raise ValueError(f"high arcs must not overlap: beta={beta}")
    # high arc [jt - w, jt + w) split at the wrap point for j = 0
    edges: List[Tuple[float, float, float]] = [(0.0, w, eps)]
    for j in range(1, k):
        c = j * t
        edges.append((c - t + w, c - w, 0.0))
        edges.append((c - w, c + w, eps))
    edges.append(((k - 1) * t + w if k > 1 else w, TWO_PI - w, 0.0))
    edges.append((TWO_PI - w, TWO_PI, eps))
    segs = [ExpSegment(lo, hi, lv, 0.0) for lo, hi, lv in edges]
    return normalize(segs, RING, jumps=range(1, len(segs)))


def local_ring_mechanism(eps: float, k: int) -> Tuple[RingMechanism, float]:
    """Optimal local-DP mechanism with k equally spaced results; cost is ``beta * t``."""
    eps, k = _check(eps, k)
    beta = local_beta(eps)
    t = TWO_PI / k
    density = two_level_density(eps, k, beta)
    offsets = OffsetSet([j * t for j in range(k)])
    return RingMechanism(eps, k, beta, t, density, offsets), beta * t


def local_ring_cost(eps: float, k: int) -> float:
    """Closed form ``pi (e^(eps/2) - 1) / (k (e^eps - 1))``."""
    eps, k = _check(eps, k)
    return math.pi * math.expm1(0.5 * eps) / (k * math.expm1(eps))


# -- geographic, k = 2 --------------------------------------------------------

def peak_density(eps: float, t: float) -> PiecewiseExpDensity:
    """Ring density symmetric under x -> 2pi - x whose log rises at rate eps on
    [0, t), falls on [t, pi], and mirrors on the other half-ring.

    t = 0 is the wrapped Laplace shape with its mode at 0.
    """
    t = min(max(float(t), 0.0), math.pi)
    pieces = [
        (0.0, t, 0.0, eps),
        (t, math.pi, 2.0 * eps * t, -eps),
        (math.pi, TWO_PI - t, eps * (2.0 * t - TWO_PI), eps),
        (TWO_PI - t, TWO_PI, eps * TWO_PI, -eps),
    ]
    segs = [ExpSegment(lo, hi, lc, r) for lo, hi, lc, r in pieces if hi > lo]
    return normalize(segs, RING)


def _half_ring_median(d: PiecewiseExpDensity) -> float:
    # by symmetry [0, pi) carries half the mass
    return d.ppf(0.25)


def geo_ring_cost_k2(eps: float, t: float) -> Tuple[float, PiecewiseExpDensity, OffsetSet]:
    """J(t): full-ring cost of the peak-at-t density with results at a and 2pi - a."""
    d = peak_density(eps, t)
    a = _half_ring_median(d)
    offsets = OffsetSet([a, TWO_PI - a])
    return expected_min_disutility(d, offsets), d, offsets


def geo_ring_optimize_k2(eps: float, t_grid: int = 512):
    """Minimize J over t in [0, pi]: uniform grid, then golden section to 1e-6.

    Returns ``(t_star, cost, density, offsets)``.
    """
    eps, _ = _check(eps, 2)
    if t_grid < 64:
        raise ValueError(f"t_grid must be at least 64, got {t_grid}")
    grid = np.linspace(0.0, math.pi, int(t_grid))
    vals = [geo_ring_cost_k2(eps, float(t))[0] for t in grid]
    i = int(np.argmin(vals))
    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, len(grid) - 1)])
    f = lambda t: geo_ring_cost_k2(eps, t)[0]
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    e = a + _GOLDEN * (b - a)
    fc, fe = f(c), f(e)
    while b - a > T_TOL:
        if fc <= fe:
            b, e, fe = e, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + _GOLDEN * (b - a)
            fe = f(e)
    t_star = 0.5 * (a + b)
    cost, d, offsets = geo_ring_cost_k2(eps, t_star)
    if vals[i] < cost:
        # the grid point itself was better (e.g. a boundary minimum)
        t_star = float(grid[i])
        cost, d, offsets = geo_ring_cost_k2(eps, t_star)
    return t_star, cost, d, offsets


def geo_ring_laplace_cost_k2(eps: float) -> float:
    """Cost of the wrapped Laplace shape (mode at 0, minimum at pi) with two results."""
    eps, _ = _check(eps, 2)
    return geo_ring_cost_k2(eps, 0.0)[0]
