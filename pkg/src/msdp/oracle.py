"""Independent checks: brute-force offset search and Monte Carlo cost."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .common import DisutilityFn, OffsetSet, as_disutility, child_seed, make_rng
from .density import PiecewiseExpDensity, expected_min_disutility
from .errors import BudgetExhausted
from .line_mech import _GOLDEN
from .mechanism import MechanismConfig

MC_BATCH = 1 << 16
LINE_SPAN_Q = 1e-9
COORD_TOL = 1e-9


@dataclass(frozen=True)
class SearchBudget:
    grid_points: int = 48
    refine_iters: int = 60
    restarts: int = 4
    seed: int = 0

    def __post_init__(self):
        for name in ("grid_points", "refine_iters", "restarts"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class CostEstimate:
    mean: float
    stderr: float
    n: int

    def agrees(self, value: float, sigmas: float = 4.0) -> bool:
        return abs(self.mean - value) <= sigmas * self.stderr


def _golden(f, lo: float, hi: float, tol: float) -> Tuple[float, float]:
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
    x = 0.5 * (a + b)
    return x, f(x)


def _bracket(xs: List[float], i: int, ring: bool, circ: float, span: Tuple[float, float]):
    """Interval strictly between the neighbors of coordinate ``i``."""
    k = len(xs)
    if ring:
        if k == 1:
            return xs[0] - 0.5 * circ, xs[0] + 0.5 * circ
        left = xs[i - 1] if i > 0 else xs[-1] - circ
        right = xs[i + 1] if i < k - 1 else xs[0] + circ
        return left, right
    left = xs[i - 1] if i > 0 else span[0]
    right = xs[i + 1] if i < k - 1 else span[1]
    return left, right


def _descend(cost, start: List[float], budget: SearchBudget, ring: bool, circ: float,
             span: Tuple[float, float]) -> Tuple[List[float], float, bool]:
    xs = sorted(start)
    best = cost(xs)
    moved = False
    for sweep in range(budget.refine_iters):
        before = best
        for i in range(len(xs)):
            lo, hi = _bracket(xs, i, ring, circ, span)
            gap = 1e-12 * max(1.0, abs(hi - lo))
            lo, hi = lo + gap, hi - gap
            if not hi > lo:
                continue

            def f(x, i=i):
                trial = list(xs)
                trial[i] = x
                return cost(trial)

            if sweep == 0:
                # coarse scan first so a poor start cannot trap the line search
                pts = np.linspace(lo, hi, budget.grid_points + 2)[1:-1]
                vals = [f(float(p)) for p in pts]
                j = int(np.argmin(vals))
                lo = float(pts[j - 1]) if j > 0 else lo
                hi = float(pts[j + 1]) if j < len(pts) - 1 else hi
            x, fx = _golden(f, lo, hi, COORD_TOL)
            # round-off sized gains on a flat slice do not count as progress
            if fx < best - 4e-16 * max(1.0, abs(best)):
                xs[i] = x
                best = fx
                moved = True
        if ring:
            xs = sorted(x % circ for x in xs)
        if before - best < 1e-14:
            break
    return xs, best, moved


def brute_force_offsets(d: PiecewiseExpDensity, k: int, h=None, budget: SearchBudget = SearchBudget(),
                        candidates: Sequence[Sequence[float]] = ()) -> Tuple[OffsetSet, float]:
    """Cyclic coordinate descent on the exact cost from several starts.

    Starts are the given ``candidates`` plus ``budget.restarts`` random draws
    from the noise itself. Warns with BudgetExhausted if no start improved.
    """
    h = as_disutility(h)
    ring = d.domain.is_ring
    circ = d.domain.circumference if ring else 0.0
    span = (d.ppf(LINE_SPAN_Q), d.ppf(1.0 - LINE_SPAN_Q)) if not ring else (0.0, circ)

    def cost(xs):
        return expected_min_disutility(d, OffsetSet(_distinct(xs, ring, circ)), h)

    rng = make_rng(budget.seed)
    starts = [sorted(float(x) for x in c) for c in candidates]
    for _ in range(budget.restarts):
        starts.append(sorted(float(x) for x in d.sample(rng, k)))
    best_xs, best_cost, any_moved = None, math.inf, False
    for s in starts:
        xs, c, moved = _descend(cost, s, budget, ring, circ, span)
        any_moved = any_moved or moved
        if c < best_cost:
            best_xs, best_cost = xs, c
    if not any_moved:
        warnings.warn("no descent step succeeded from any start", BudgetExhausted, stacklevel=2)
    return OffsetSet(_distinct(best_xs, ring, circ)), best_cost


def _distinct(xs, ring: bool, circ: float) -> List[float]:
    # coincident offsets are harmless for the cost; nudge them apart to keep the set valid
    out = []
    for x in sorted((x % circ) if ring else x for x in xs):
        if out and x <= out[-1]:
            x = np.nextafter(out[-1], math.inf)
        out.append(float(x))
    return out


def _batch_stats(mech: MechanismConfig, u: float, n: int, seed: int) -> Tuple[float, float]:
    rng = make_rng(seed)
    noise = mech.noise.sample(rng, n)
    signal = mech.domain.wrap(u + noise) if mech.domain.is_ring else u + noise
    results = signal[:, None] + mech.offsets.as_array()[None, :]
    if mech.domain.is_ring:
        results = mech.domain.wrap(results)
    dist = np.min(mech.domain.distance(u, results), axis=1)
    cost = dist if mech.h.is_identity else np.asarray(mech.h(dist), dtype=float)
    return math.fsum(cost), math.fsum(cost * cost)


def mc_cost(mech: MechanismConfig, n: int, seed: int, u: float = 0.0, threads: int = 1) -> CostEstimate:
    """Monte Carlo expected min-disutility for a user at ``u``.

    Work is split into fixed batches with derived seeds and merged in batch
    order, so the estimate does not depend on ``threads``.
    """
    n = int(n)
    if n < 1000:
        raise ValueError(f"n must be at least 1000, got {n}")
    sizes = [MC_BATCH] * (n // MC_BATCH)
    if n % MC_BATCH:
        sizes.append(n % MC_BATCH)
    jobs = [(mech, u, m, child_seed(seed, i)) for i, m in enumerate(sizes)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            stats = list(pool.map(lambda a: _batch_stats(*a), jobs))
    else:
        stats = [_batch_stats(*a) for a in jobs]
    total = math.fsum(s for s, _ in stats)
    total_sq = math.fsum(q for _, q in stats)
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0) * n / (n - 1)
    return CostEstimate(mean, math.sqrt(var / n), n)
