"""Adaptive Simpson quadrature on finite intervals."""
from __future__ import annotations

from typing import Callable, Sequence

ABS_TOL = 1e-10
MAX_DEPTH = 40


def _simpson(fa: float, fm: float, fb: float, width: float) -> float:
    return width * (fa + 4.0 * fm + fb) / 6.0


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     tol: float = ABS_TOL, max_depth: int = MAX_DEPTH) -> float:
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    Uses an explicit stack so deep refinement does not hit the recursion limit.
    Intervals that reach ``max_depth`` are accepted with their Richardson-corrected
    estimate.
    """
    if b == a:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, tol, max_depth)
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = _simpson(fa, fm, fb, b - a)
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = _simpson(flo, flm, fmid, mid - lo)
        right = _simpson(fmid, frm, fhi, hi - mid)
        delta = left + right - est
        if depth >= max_depth or abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
        else:
            stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1))
            stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1))
    return total


def integrate_pieces(f: Callable[[float], float], breakpoints: Sequence[float],
                     tol: float = ABS_TOL) -> float:
    """Sum adaptive Simpson integrals between consecutive sorted breakpoints.

    The tolerance is split evenly across pieces.
    """
    pts = sorted(breakpoints)
    n = max(len(pts) - 1, 1)
    return sum(adaptive_simpson(f, lo, hi, tol / n)
               for lo, hi in zip(pts[:-1], pts[1:]) if hi > lo)
