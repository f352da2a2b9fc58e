"""Quantile placement of results for fixed symmetric log-concave noise.

With one-sided survival function F (mean 1/eps), results go at the quantiles
``a_i = F^-1(1 - i/K)`` and their mirror images. The expected distance to the
nearest result is O(log K / (K eps)). These noises are chosen for utility only;
they are not eps-geographically private.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.special import erfc, erfcinv

from .common import OffsetSet, make_rng
from .errors import BoundViolated, InvalidK, NonPositiveEpsilon
from .quadrature import adaptive_simpson

QUANTILE_TOL = 1e-12
TAIL_SURVIVAL = 1e-17


@dataclass(frozen=True)
class SurvivalFn:
    """One-sided noise magnitude X >= 0 described by ``F(x) = Pr[X >= x]``."""

    tag: str
    survival: Callable[[float], float]
    quantile: Callable[[float], float]
    density: Callable[[float], float]
    mean: float

    @property
    def eps(self) -> float:
        return 1.0 / self.mean

    @classmethod
    def exponential(cls, eps: float = 1.0) -> "SurvivalFn":
        eps = _check_eps(eps)
        return cls(
            "exponential",
            lambda x: math.exp(-eps * x),
            lambda p: -math.log(p) / eps,
            lambda x: eps * math.exp(-eps * x),
            1.0 / eps,
        )

    @classmethod
    def halfnormal(cls, eps: float = 1.0) -> "SurvivalFn":
        eps = _check_eps(eps)
        sigma = math.sqrt(math.pi / 2.0) / eps
        root2 = sigma * math.sqrt(2.0)
        peak = 2.0 / (sigma * math.sqrt(2.0 * math.pi))
        return cls(
            "halfnormal",
            lambda x: float(erfc(x / root2)),
            lambda p: float(root2 * erfcinv(p)),
            lambda x: peak * math.exp(-0.5 * (x / sigma) ** 2),
            1.0 / eps,
        )

    @classmethod
    def custom(cls, survival: Callable[[float], float], mean: float,
               density: Optional[Callable[[float], float]] = None) -> "SurvivalFn":
        """User survival function. The quantile is found by bisection; the density,
        if not given, by a central difference of the survival."""
        mean = float(mean)
        if not mean > 0:
            raise ValueError(f"mean must be positive, got {mean}")
        if abs(survival(0.0) - 1.0) > 1e-12:
            raise ValueError("survival(0) must be 1")

        def quantile(p: float) -> float:
            if p >= 1.0:
                return 0.0
            hi = mean
            while survival(hi) > p:
                hi *= 2.0
                if hi > 1e12 * mean:
                    raise ValueError(f"survival never drops below {p}")
            lo = 0.0
            while hi - lo > QUANTILE_TOL * max(1.0, hi):
                mid = 0.5 * (lo + hi)
                if survival(mid) > p:
                    lo = mid
                else:
                    hi = mid
            return 0.5 * (lo + hi)

        if density is None:
            step = 1e-6 * mean

            def density(x: float) -> float:
                lo = max(x - step, 0.0)
                return (survival(lo) - survival(x + step)) / (x + step - lo)

            return cls("custom-fd", survival, quantile, density, mean)
        return cls("custom", survival, quantile, density, mean)

    def sample(self, rng, size: int) -> np.ndarray:
        """Nonnegative draws of X."""
        if self.tag == "exponential":
            return rng.exponential(self.mean, size)
        if self.tag == "halfnormal":
            return np.abs(rng.normal(0.0, math.sqrt(math.pi / 2.0) * self.mean, size))
        u = 1.0 - rng.random(size)
        return np.array([self.quantile(float(p)) for p in u])


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not eps > 0 or not math.isfinite(eps):
        raise NonPositiveEpsilon(f"eps must be positive, got {eps}")
    return eps


def _check_K(K: int) -> int:
    if int(K) != K or K < 1:
        raise InvalidK(f"K must be a positive integer, got {K}")
    return int(K)


def _positive_points(f: SurvivalFn, K: int) -> List[float]:
    return [0.0] + [f.quantile(1.0 - i / K) for i in range(1, K)]


def quantile_offsets(f: SurvivalFn, K: int) -> OffsetSet:
    """``{-a_{K-1}, ..., -a_1, 0, a_1, ..., a_{K-1}}`` with ``a_i = F^-1(1 - i/K)``."""
    K = _check_K(K)
    pos = _positive_points(f, K)[1:]
    return OffsetSet([-a for a in reversed(pos)] + [0.0] + pos)


def mhr_cost(f: SurvivalFn, K: int, tol: float = 1e-11) -> float:
    """phi: expected distance from X to the nearest placed result.

    By symmetry only the nonnegative results matter for X >= 0.
    """
    K = _check_K(K)
    if f.tag == "custom-fd":
        # a finite-difference density is only good to about 1e-9
        tol = max(tol, 1e-9)
    pts = _positive_points(f, K)
    top = f.quantile(TAIL_SURVIVAL)
    dens = f.density
    parts = []
    edges = [0.0]
    for a, b in zip(pts[:-1], pts[1:]):
        edges += [0.5 * (a + b), b]
    edges.append(max(top, pts[-1] * 2.0 + f.mean))
    # edges alternate: cell boundary, result, cell boundary, ...
    nearest = [pts[0]]
    for p in pts[1:]:
        nearest += [p, p]
    nearest.append(pts[-1])
    for (lo, hi), p in zip(zip(edges[:-1], edges[1:]), nearest):
        if hi > lo:
            parts.append(adaptive_simpson(lambda x: abs(x - p) * dens(x), lo, hi, tol))
    return math.fsum(parts)


@dataclass(frozen=True)
class BoundRow:
    K: int
    phi: float
    bound: float
    ratio: float


def mhr_bound(f: SurvivalFn, K: int) -> float:
    return (math.e * (1.0 + math.log(K)) + 1.0) / (K * f.eps)


def mhr_bound_check(f: SurvivalFn, K_list: Sequence[int], raise_on_violation: bool = True) -> List[BoundRow]:
    """phi(K) against ``(e (1 + log K) + 1) / (K eps)`` for each K.

    ``ratio`` is ``phi K eps / (1 + log K)``; the bound implies ``ratio <= e + 1``.
    """
    rows = []
    for K in K_list:
        K = _check_K(K)
        phi = mhr_cost(f, K)
        bound = mhr_bound(f, K)
        rows.append(BoundRow(K, phi, bound, phi * K * f.eps / (1.0 + math.log(K))))
        if raise_on_violation and phi > bound:
            raise BoundViolated(f"phi({K}) = {phi} exceeds {bound}")
    return rows


def mc_phi(f: SurvivalFn, K: int, n: int, seed) -> tuple:
    """Monte Carlo phi from ``n`` signed draws; returns ``(mean, stderr)``."""
    S = quantile_offsets(f, K).as_array()
    rng = make_rng(seed)
    x = f.sample(rng, n) * rng.choice([-1.0, 1.0], n)
    idx = np.clip(np.searchsorted(S, x), 1, len(S) - 1) if len(S) > 1 else None
    if idx is None:
        d = np.abs(x - S[0])
    else:
        d = np.minimum(np.abs(x - S[idx - 1]), np.abs(x - S[idx]))
    return float(d.mean()), float(d.std(ddof=1) / math.sqrt(n))
