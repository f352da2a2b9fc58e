"""Dual certificate for geographic multi-selection: the ODE for nu.

    nu'(r) = delta(r) * (min_a h(|r - a|) - lambda_hat) - eps * |nu(r)|,
    delta(r) = (zeta / 2) * exp(-zeta * |r|),   nu(v_med) = 0.

A valid dual needs nu >= 0 far to the right and nu <= 0 far to the left. When
lambda_hat is too large, nu turns negative on the right and then diverges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from .common import DisutilityFn, as_disutility
from .errors import NonPositiveEpsilon, StepTooLarge
from .line_mech import closed_form_cost

NONNEGATIVE = "NonnegativeTail"
NEGATIVE = "NegativeTail"
NONPOSITIVE = "NonpositiveTail"
POSITIVE = "PositiveTail"
UNDETERMINED = "Undetermined"

DEFAULT_STEP = 1e-3
ERR_TOL = 1e-8
CROSS_TOL = 1e-12
TAIL_WINDOW = 0.2


@dataclass(frozen=True)
class DualProblem:
    eps: float
    zeta: float
    lambda_hat: float
    v: Tuple[float, ...]
    h: DisutilityFn = field(default_factory=DisutilityFn.identity)

    def __post_init__(self):
        if not (0 < self.zeta < self.eps):
            raise NonPositiveEpsilon(f"need 0 < zeta < eps, got zeta={self.zeta}, eps={self.eps}")
        if not self.lambda_hat > 0:
            raise ValueError(f"lambda_hat must be positive, got {self.lambda_hat}")
        v = tuple(sorted(float(x) for x in self.v))
        if not v:
            raise ValueError("v must be nonempty")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "h", as_disutility(self.h))

    @property
    def v_med(self) -> float:
        """Median of v; the midpoint of the two middle entries when len(v) is even.

        Starting from the lower median instead leaves some k=2 problems below the
        guaranteed threshold with a right tail that never turns nonnegative.
        """
        n = len(self.v)
        return 0.5 * (self.v[(n - 1) // 2] + self.v[n // 2])

    def default_r_max(self) -> float:
        return max(abs(x) for x in self.v) + 25.0 / min(self.eps, self.zeta)


@dataclass(frozen=True)
class DualTrace:
    """Samples of nu on an increasing r grid, plus tail classification.

    ``right_class`` is NonnegativeTail / NegativeTail / Undetermined and
    ``left_class`` its mirror (NonpositiveTail / PositiveTail / Undetermined).
    ``tail_class`` combines them: NonnegativeTail when both tails are valid,
    NegativeTail when either diverges the wrong way.
    """

    r_grid: Tuple[float, ...]
    nu: Tuple[float, ...]
    v_med: float
    tail_class: str
    right_class: str
    left_class: str
    nonneg_from: Optional[float]
    nonpos_until: Optional[float]
    tol: float

    @property
    def valid(self) -> bool:
        return self.tail_class == NONNEGATIVE

    def endpoint(self) -> float:
        return self.nu[-1]


def _kinks(p: DualProblem) -> List[float]:
    v = p.v
    pts = set(v)
    pts.update(0.5 * (a + b) for a, b in zip(v[:-1], v[1:]))
    pts.add(0.0)
    return sorted(pts)


def _integrate_side(p: DualProblem, direction: int, r_max: float, step: float):
    """Integrate from v_med out to ``direction * r_max``. Returns (rs, nus)."""
    eps, zeta, lam = p.eps, p.zeta, p.lambda_hat
    half_z = 0.5 * zeta
    v = p.v
    hfn = None if p.h.is_identity else p.h.fn
    sgn = float(direction)

    ez = math.exp
    if hfn is None and len(v) == 1:
        a0 = v[0]

        def f(r: float, nu: float) -> float:
            return sgn * (half_z * ez(-zeta * abs(r)) * (abs(r - a0) - lam) - eps * abs(nu))
    elif hfn is None:
        # nearest entry of v: compare against the midpoints
        mids = [0.5 * (a + b) for a, b in zip(v[:-1], v[1:])]
        pairs = list(zip(mids, v[:-1]))
        last = v[-1]

        def f(r: float, nu: float) -> float:
            a = last
            for m, c in pairs:
                if r <= m:
                    a = c
                    break
            return sgn * (half_z * ez(-zeta * abs(r)) * (abs(r - a) - lam) - eps * abs(nu))
    else:
        def f(r: float, nu: float) -> float:
            d = min(abs(r - a) for a in v)
            # derivative with respect to the outward coordinate
            return sgn * (half_z * ez(-zeta * abs(r)) * (float(hfn(d)) - lam) - eps * abs(nu))

    def rk4(r: float, y: float, hs: float) -> float:
        dr = sgn * hs
        k1 = f(r, y)
        k2 = f(r + 0.5 * dr, y + 0.5 * hs * k1)
        k3 = f(r + 0.5 * dr, y + 0.5 * hs * k2)
        k4 = f(r + dr, y + hs * k3)
        return y + hs * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0

    def advance(r: float, y: float, hs: float) -> Tuple[float, float]:
        # one full step against two half steps; they share the first stage
        dr = sgn * hs
        q = 0.5 * hs
        k1 = f(r, y)
        rq = r + 0.5 * dr
        k2 = f(rq, y + q * k1)
        k3 = f(rq, y + q * k2)
        k4 = f(r + dr, y + hs * k3)
        full = y + hs * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        r4 = r + 0.25 * dr
        q2 = 0.5 * q
        j2 = f(r4, y + q2 * k1)
        j3 = f(r4, y + q2 * j2)
        j4 = f(rq, y + q * j3)
        mid = y + q * (k1 + 2.0 * j2 + 2.0 * j3 + j4) / 6.0
        r3 = r + 0.75 * dr
        l1 = f(rq, mid)
        l2 = f(r3, mid + q2 * l1)
        l3 = f(r3, mid + q2 * l2)
        l4 = f(r + dr, mid + q * l3)
        fine = mid + q * (l1 + 2.0 * l2 + 2.0 * l3 + l4) / 6.0
        return fine, abs(full - fine) / max(1.0, abs(fine))

    def checked(r: float, y: float, hs: float) -> float:
        y_next, err = advance(r, y, hs)
        if err > ERR_TOL:
            raise StepTooLarge(f"local error {err:.3g} at r={r:.6g} with step {hs:.3g}")
        return y_next

    start = p.v_med
    if direction > 0:
        end = r_max
        stops = [x for x in _kinks(p) if start < x < end] + [end]
    else:
        end = -r_max
        stops = [x for x in reversed(_kinks(p)) if end < x < start] + [end]

    rs = [start]
    ys = [0.0]
    r, y = start, 0.0
    for stop in stops:
        span = abs(stop - r)
        if span <= 0:
            continue
        n = max(1, math.ceil(span / step - 1e-9))
        hs = span / n
        base = r
        for i in range(1, n + 1):
            r_next = stop if i == n else base + sgn * i * hs
            hh = abs(r_next - r)
            y_next, err = advance(r, y, hh)
            if y != 0.0 and y_next != 0.0 and (y < 0) != (y_next < 0):
                # the |nu| kink lies inside this step, so its error estimate is meaningless;
                # locate the sign change and restart from it so |nu| is smooth per step
                lo, hi = 0.0, hh
                while hi - lo > CROSS_TOL:
                    mid = 0.5 * (lo + hi)
                    ym = rk4(r, y, mid)
                    if (ym < 0) == (y < 0):
                        lo = mid
                    else:
                        hi = mid
                rc = r + sgn * hi
                yc = rk4(r, y, hi)
                rs.append(rc)
                ys.append(yc)
                y_next = checked(rc, yc, hh - hi) if hh - hi > 0 else yc
            elif err > ERR_TOL:
                raise StepTooLarge(f"local error {err:.3g} at r={r:.6g} with step {hh:.3g}")
            r, y = r_next, y_next
            rs.append(r)
            ys.append(y)
    return rs, ys


def _classify(values: Sequence[float], tol: float, want_nonneg: bool) -> str:
    """Classify the outer window of one tail. ``values`` run outward."""
    n = len(values)
    window = values[int(n * (1.0 - TAIL_WINDOW)):]
    s = 1.0 if want_nonneg else -1.0
    w = [s * x for x in window]
    if min(w) >= -tol:
        return NONNEGATIVE if want_nonneg else NONPOSITIVE
    diverging = w[-1] < -tol and all(b <= a for a, b in zip(w[:-1], w[1:]))
    if diverging:
        return NEGATIVE if want_nonneg else POSITIVE
    return UNDETERMINED


def _bound(rs: Sequence[float], ys: Sequence[float], tol: float, want_nonneg: bool) -> Optional[float]:
    """Innermost r beyond which the tail keeps the wanted sign, if any."""
    s = 1.0 if want_nonneg else -1.0
    last_bad = None
    for i, y in enumerate(ys):
        if s * y < -tol:
            last_bad = i
    if last_bad is None:
        return rs[0]
    if last_bad == len(ys) - 1:
        return None
    return rs[last_bad + 1]


def solve_dual_ode(p: DualProblem, r_max: Optional[float] = None, step: float = DEFAULT_STEP) -> DualTrace:
    """Fixed-step RK4 from v_med outward in both directions.

    Steps are aligned to the kinks of the forcing (entries of v, their midpoints,
    and 0); sign changes of nu are located by bisection and the step restarted
    there. Every step is checked against two half steps.
    """
    if r_max is None:
        r_max = p.default_r_max()
    m = max(abs(x) for x in p.v)
    if r_max < m + 20.0 / p.eps:
        raise ValueError(f"r_max must be at least max|v| + 20/eps = {m + 20.0 / p.eps}")
    if not 0 < step <= 1e-3:
        raise StepTooLarge(f"step must be in (0, 1e-3], got {step}")
    r_right, y_right = _integrate_side(p, 1, r_max, step)
    r_left, y_left = _integrate_side(p, -1, r_max, step)
    rs = tuple(reversed(r_left[1:])) + tuple(r_right)
    nu = tuple(reversed(y_left[1:])) + tuple(y_right)
    tol = 1e-6 * max(abs(x) for x in nu)
    right = _classify(y_right, tol, True)
    left = _classify(y_left, tol, False)
    if right == NONNEGATIVE and left == NONPOSITIVE:
        combined = NONNEGATIVE
    elif right == NEGATIVE or left == POSITIVE:
        combined = NEGATIVE
    else:
        combined = UNDETERMINED
    return DualTrace(
        r_grid=rs,
        nu=nu,
        v_med=p.v_med,
        tail_class=combined,
        right_class=right,
        left_class=left,
        nonneg_from=_bound(r_right, y_right, tol, True),
        nonpos_until=_bound(r_left, y_left, tol, False),
        tol=tol,
    )


def dual_threshold(eps: float, zeta: float, k: int) -> float:
    """Largest lambda_hat for which a valid dual is guaranteed."""
    if not 0 < zeta < eps:
        raise NonPositiveEpsilon(f"need 0 < zeta < eps, got zeta={zeta}, eps={eps}")
    return (eps - zeta) / (eps + zeta) * closed_form_cost(eps + zeta, k)


def phase_crossing(eps: float, zeta: float, v: Sequence[float], lo: float, hi: float,
                   tol: float = 1e-3, r_max: Optional[float] = None, step: float = DEFAULT_STEP,
                   h=None) -> Tuple[float, float]:
    """Bisect lambda_hat between a valid ``lo`` and an invalid ``hi``.

    Returns the final bracket. Raises ValueError if the ends are not of opposite type.
    """
    def ok(lam: float) -> bool:
        return solve_dual_ode(DualProblem(eps, zeta, lam, tuple(v), as_disutility(h)), r_max, step).valid

    if not ok(lo) or ok(hi):
        raise ValueError(f"lambda_hat bracket [{lo}, {hi}] does not straddle the phase change")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi
