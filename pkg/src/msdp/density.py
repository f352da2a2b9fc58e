"""Piecewise-exponential densities on the line and on a ring.

Every density is a list of segments ``c * exp(b * x)`` on ``[lo, hi)``. All
masses, CDFs, quantiles and first moments are evaluated in closed form, so the
expected cost of an offset set under identity disutility carries no quadrature
error. Segments store ``log(c)`` to keep ``|b * x|`` up to roughly 700 in range.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .common import LINE, Domain, DisutilityFn, OffsetLike, OffsetSet, as_disutility, as_offsets, make_rng
from .errors import (Discontinuity, EmptyOffsets, EndpointMismatch, GapOrOverlap, NonIntegrableTail,
                     PrivacyViolated)
from .quadrature import adaptive_simpson

CONTINUITY_TOL = 1e-9
PRIVACY_TOL = 1e-9
RATE_TOL = 1e-12
# tails beyond this many decay lengths are dropped in the numeric path (e^-60 ~ 1e-26)
TAIL_DECAY_LENGTHS = 60.0


def _i0(beta: float, length: float) -> float:
    """Integral of exp(-beta*u) for u in [0, length], beta >= 0."""
    if math.isinf(length):
        return 1.0 / beta
    if beta == 0.0:
        return length
    return -math.expm1(-beta * length) / beta


def _i1(beta: float, length: float) -> float:
    """Integral of u*exp(-beta*u) for u in [0, length], beta >= 0."""
    if math.isinf(length):
        return 1.0 / (beta * beta)
    z = beta * length
    if z < 0.5:
        # series sum_n (-z)^n / (n! (n+2)) keeps precision where the closed form cancels
        term, total, n = 1.0, 0.5, 0
        while True:
            n += 1
            term *= -z / n
            inc = term / (n + 2)
            total += inc
            if abs(inc) < 1e-17 * abs(total) or n > 60:
                break
        return total * length * length
    return (1.0 - math.exp(-z) * (1.0 + z)) / (beta * beta)


@dataclass(frozen=True)
class ExpSegment:
    """Density ``exp(log_coeff + rate * x)`` on ``[lo, hi)``."""

    lo: float
    hi: float
    log_coeff: float
    rate: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise GapOrOverlap(f"segment needs lo < hi, got [{self.lo}, {self.hi})")
        if math.isinf(self.lo) and not self.rate > 0:
            raise NonIntegrableTail(f"left tail needs a positive rate, got {self.rate}")
        if math.isinf(self.hi) and not self.rate < 0:
            raise NonIntegrableTail(f"right tail needs a negative rate, got {self.rate}")
        if not math.isfinite(self.log_coeff) or not math.isfinite(self.rate):
            raise ValueError("segment parameters must be finite")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def log_at(self, x: float) -> float:
        return self.log_coeff + self.rate * x

    def at(self, x: float) -> float:
        return math.exp(self.log_coeff + self.rate * x)

    def mass(self, a: Optional[float] = None, b: Optional[float] = None) -> float:
        """Mass on ``[a, b]``, a sub-interval of the segment (defaults to all of it)."""
        a = self.lo if a is None else a
        b = self.hi if b is None else b
        if b <= a:
            return 0.0
        r = self.rate
        if r > 0:
            return math.exp(self.log_at(b)) * _i0(r, b - a)
        return math.exp(self.log_at(a)) * _i0(-r, b - a)

    def linear_moment(self, a: float, b: float, p: float) -> float:
        """Integral of ``(x - p) * density(x)`` over ``[a, b]``."""
        if b <= a:
            return 0.0
        r = self.rate
        length = b - a
        if r > 0:
            vb = math.exp(self.log_at(b))
            return vb * ((b - p) * _i0(r, length) - _i1(r, length))
        va = math.exp(self.log_at(a))
        return va * ((a - p) * _i0(-r, length) + _i1(-r, length))

    def invert(self, m: float) -> float:
        """Point x in the segment with mass ``m`` on ``[lo, x)``."""
        r = self.rate
        if r == 0.0:
            return self.lo + m / math.exp(self.log_coeff)
        if r < 0:
            beta = -r
            arg = -m * beta / math.exp(self.log_at(self.lo))
            return self.lo + math.log1p(max(arg, -1.0)) / r if arg > -1.0 else self.hi
        rest = max(self.mass() - m, 0.0)
        arg = -rest * r / math.exp(self.log_at(self.hi))
        if arg <= -1.0:
            return self.lo
        return self.hi + math.log1p(arg) / r

    def scaled(self, log_factor: float) -> "ExpSegment":
        return ExpSegment(self.lo, self.hi, self.log_coeff + log_factor, self.rate)

    def shifted(self, delta: float) -> "ExpSegment":
        """Same shape moved right by ``delta``."""
        return ExpSegment(self.lo + delta, self.hi + delta, self.log_coeff - self.rate * delta, self.rate)


@dataclass(frozen=True)
class PrivacyReport:
    satisfied: bool
    worst_ratio_log: float
    witness: Tuple[float, float]


@dataclass(frozen=True)
class PiecewiseExpDensity:
    """A density made of exponential segments tiling a line or a ring.

    ``jumps`` holds indices ``i`` of breakpoints (between segment ``i-1`` and
    ``i``; index 0 is the wrap point of a ring) where a discontinuity is allowed.
    """

    domain: Domain
    segments: Tuple[ExpSegment, ...]
    total_mass: float
    jumps: frozenset = field(default_factory=frozenset)

    # -- construction -----------------------------------------------------

    @classmethod
    def from_segments(cls, segments: Iterable[ExpSegment], domain: Domain = LINE,
                      jumps: Iterable[int] = (), normalized: bool = True) -> "PiecewiseExpDensity":
        segs = _validate_tiling(list(segments), domain)
        jumps = frozenset(int(j) for j in jumps)
        _check_continuity(segs, domain, jumps)
        mass = math.fsum(s.mass() for s in segs)
        if not (mass > 0 and math.isfinite(mass)):
            raise NonIntegrableTail(f"total mass must be positive and finite, got {mass}")
        if normalized:
            shift = -math.log(mass)
            segs = [s.scaled(shift) for s in segs]
            mass = math.fsum(s.mass() for s in segs)
        return cls(domain, tuple(segs), mass, jumps)

    @classmethod
    def from_log_knots(cls, xs: Sequence[float], log_values: Sequence[float],
                       left_rate: float, right_rate: float) -> "PiecewiseExpDensity":
        """Continuous line density whose log interpolates the knots linearly.

        ``left_rate`` must be positive and ``right_rate`` negative so the tails integrate.
        """
        xs = [float(x) for x in xs]
        ys = [float(y) for y in log_values]
        if len(xs) != len(ys) or len(xs) < 1:
            raise ValueError("need matching nonempty knot arrays")
        segs = [ExpSegment(-math.inf, xs[0], ys[0] - left_rate * xs[0], left_rate)]
        for x0, x1, y0, y1 in zip(xs[:-1], xs[1:], ys[:-1], ys[1:]):
            rate = (y1 - y0) / (x1 - x0)
            segs.append(ExpSegment(x0, x1, y0 - rate * x0, rate))
        segs.append(ExpSegment(xs[-1], math.inf, ys[-1] - right_rate * xs[-1], right_rate))
        return cls.from_segments(segs, LINE)

    # -- evaluation -------------------------------------------------------

    @property
    def breakpoints(self) -> List[float]:
        """Internal segment boundaries (for a ring, the wrap point 0 is included)."""
        pts = [s.lo for s in self.segments[1:]]
        if self.domain.is_ring:
            pts.insert(0, self.segments[0].lo)
        return pts

    def _locate(self, x: float) -> int:
        lo_edges = [s.lo for s in self.segments]
        i = int(np.searchsorted(lo_edges, x, side="right")) - 1
        return min(max(i, 0), len(self.segments) - 1)

    def log_pdf(self, x):
        scalar = np.ndim(x) == 0
        xs = np.atleast_1d(np.asarray(self.domain.wrap(np.asarray(x, dtype=float)), dtype=float))
        lo_edges = np.array([s.lo for s in self.segments])
        idx = np.clip(np.searchsorted(lo_edges, xs, side="right") - 1, 0, len(self.segments) - 1)
        logc = np.array([s.log_coeff for s in self.segments])[idx]
        rate = np.array([s.rate for s in self.segments])[idx]
        out = logc + rate * xs
        return float(out[0]) if scalar else out

    def pdf(self, x):
        return np.exp(self.log_pdf(x))

    def mass_between(self, a: float, b: float) -> float:
        """Mass of ``[a, b]`` in segment coordinates (no wrapping)."""
        if b <= a:
            return 0.0
        parts = []
        for s in self.segments:
            lo, hi = max(a, s.lo), min(b, s.hi)
            if hi > lo:
                parts.append(s.mass(lo, hi))
        return math.fsum(parts)

    def cdf(self, x: float) -> float:
        start = self.segments[0].lo
        return self.mass_between(start, float(self.domain.wrap(x))) / self.total_mass

    def ppf(self, p: float) -> float:
        """Inverse CDF, computed segment by segment in closed form."""
        target = min(max(p, 0.0), 1.0) * self.total_mass
        acc = 0.0
        for s in self.segments:
            m = s.mass()
            if acc + m >= target:
                return s.invert(target - acc)
            acc += m
        return self.segments[-1].hi if math.isfinite(self.segments[-1].hi) else self.segments[-1].lo

    def sample(self, rng, size=None):
        """Inverse-CDF sampling; identical generator state gives an identical stream."""
        rng = make_rng(rng)
        n = 1 if size is None else int(np.prod(size))
        u = rng.random(n) * self.total_mass
        masses = np.array([s.mass() for s in self.segments])
        cum = np.concatenate([[0.0], np.cumsum(masses)])
        idx = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, len(self.segments) - 1)
        out = np.empty(n)
        for j, s in enumerate(self.segments):
            mask = idx == j
            if not mask.any():
                continue
            m = np.clip(u[mask] - cum[j], 0.0, masses[j])
            out[mask] = _invert_vec(s, m, masses[j])
        if self.domain.is_ring:
            out = np.asarray(self.domain.wrap(out))
        if size is None:
            return float(out[0])
        return out.reshape(size)

    def grid(self, n: int = 1024, lo: Optional[float] = None, hi: Optional[float] = None):
        """Evenly spaced ``(x, rho)`` samples for plotting."""
        if self.domain.is_ring:
            lo = 0.0 if lo is None else lo
            hi = self.domain.circumference if hi is None else hi
            xs = lo + (hi - lo) * np.arange(n) / n
        else:
            lo = self.ppf(1e-4) if lo is None else lo
            hi = self.ppf(1 - 1e-4) if hi is None else hi
            xs = np.linspace(lo, hi, n)
        return xs, self.pdf(xs)

    # -- serialization ----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "domain": self.domain.to_json(),
            "segments": [{"lo": _enc(s.lo), "hi": _enc(s.hi), "log_coeff": s.log_coeff, "rate": s.rate}
                         for s in self.segments],
            "flags": {"jumps": sorted(self.jumps)},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), allow_nan=False)

    @classmethod
    def from_json(cls, obj) -> "PiecewiseExpDensity":
        if isinstance(obj, str):
            obj = json.loads(obj)
        domain = Domain.from_json(obj["domain"])
        segs = [ExpSegment(_dec(s["lo"]), _dec(s["hi"]), float(s["log_coeff"]), float(s["rate"]))
                for s in obj["segments"]]
        jumps = obj.get("flags", {}).get("jumps", [])
        return cls.from_segments(segs, domain, jumps, normalized=False)


def _enc(x: float):
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return x


def _dec(x) -> float:
    if isinstance(x, str):
        return {"+inf": math.inf, "inf": math.inf, "-inf": -math.inf}[x]
    return float(x)


def _invert_vec(s: ExpSegment, m: np.ndarray, seg_mass: float) -> np.ndarray:
    r = s.rate
    if r == 0.0:
        return s.lo + m / math.exp(s.log_coeff)
    with np.errstate(divide="ignore", invalid="ignore"):
        if r < 0:
            arg = -m * (-r) / math.exp(s.log_at(s.lo))
            x = s.lo + np.log1p(np.maximum(arg, -1.0)) / r
        else:
            rest = np.maximum(seg_mass - m, 0.0)
            arg = -rest * r / math.exp(s.log_at(s.hi))
            x = s.hi + np.log1p(np.maximum(arg, -1.0)) / r
    x = np.where(np.isfinite(x), x, np.where(np.asarray(m) <= 0, s.lo, s.hi))
    return np.clip(x, s.lo, s.hi)


def _validate_tiling(segs: List[ExpSegment], domain: Domain) -> List[ExpSegment]:
    if not segs:
        raise GapOrOverlap("no segments")
    segs = sorted(segs, key=lambda s: s.lo)
    fixed = [segs[0]]
    for s in segs[1:]:
        prev = fixed[-1]
        gap = s.lo - prev.hi
        if abs(gap) > 1e-12 * max(1.0, abs(s.lo)):
            kind = "gap" if gap > 0 else "overlap"
            raise GapOrOverlap(f"{kind} between {prev.hi} and {s.lo}")
        if gap != 0.0:
            s = ExpSegment(prev.hi, s.hi, s.log_coeff, s.rate)
        fixed.append(s)
    if domain.is_ring:
        c = domain.circumference
        if abs(fixed[0].lo) > 1e-12 or abs(fixed[-1].hi - c) > 1e-12 * c:
            raise GapOrOverlap(f"ring segments must tile [0, {c})")
        f0, fl = fixed[0], fixed[-1]
        fixed[0] = ExpSegment(0.0, f0.hi, f0.log_coeff, f0.rate)
        fixed[-1] = ExpSegment(fixed[-1].lo, c, fl.log_coeff, fl.rate)
    else:
        if not (math.isinf(fixed[0].lo) and math.isinf(fixed[-1].hi)):
            raise GapOrOverlap("line segments must cover (-inf, +inf)")
    return fixed


def _jump_sizes(segs: Sequence[ExpSegment], domain: Domain) -> List[Tuple[int, float, float]]:
    """``(breakpoint index, position, |log jump|)`` for every breakpoint."""
    out = []
    for i in range(1, len(segs)):
        x = segs[i].lo
        out.append((i, x, abs(segs[i].log_at(x) - segs[i - 1].log_at(x))))
    if domain.is_ring:
        c = domain.circumference
        out.append((0, 0.0, abs(segs[0].log_at(0.0) - segs[-1].log_at(c))))
    return out


def _check_continuity(segs, domain, jumps):
    for i, x, size in _jump_sizes(segs, domain):
        if size > CONTINUITY_TOL and i not in jumps:
            raise Discontinuity(f"unflagged jump of {size:.3g} in log-density at x={x}")


def normalize(segments: Iterable[ExpSegment], domain: Domain = LINE,
              jumps: Iterable[int] = ()) -> PiecewiseExpDensity:
    """Scale a segment tiling to unit mass, keeping its shape."""
    return PiecewiseExpDensity.from_segments(segments, domain, jumps, normalized=True)


# -- privacy ----------------------------------------------------------------

def check_privacy(d: PiecewiseExpDensity, eps: float, metric: str = "geographic") -> PrivacyReport:
    """Analytic privacy check of a noise density.

    Geographic: the log-density must be eps-Lipschitz in the domain metric, i.e.
    every rate satisfies ``|rate| <= eps`` and there are no jumps. The reported
    worst ratio is the exact supremum of ``log rho(x) - log rho(y) - eps*d(x, y)``.
    Local: ``log sup rho - log inf rho <= eps``.
    """
    metric = metric.lower()
    if metric == "geographic":
        return _check_geographic(d, eps)
    if metric == "local":
        return _check_local(d, eps)
    raise ValueError(f"unknown privacy metric {metric!r}")


def _check_geographic(d: PiecewiseExpDensity, eps: float) -> PrivacyReport:
    segs = d.segments
    max_rate = max(abs(s.rate) for s in segs)
    max_jump = max((j for _, _, j in _jump_sizes(segs, d.domain)), default=0.0)
    criterion = max_rate <= eps + RATE_TOL and max_jump <= CONTINUITY_TOL

    if not d.domain.is_ring:
        if segs[0].rate > eps + RATE_TOL:
            return PrivacyReport(False, math.inf, (segs[0].hi, -math.inf))
        if -segs[-1].rate > eps + RATE_TOL:
            return PrivacyReport(False, math.inf, (segs[-1].lo, math.inf))

    # Candidate extremal pairs: all breakpoints (both one-sided limits) and, on a
    # ring, their antipodes, where the geodesic distance has its kink.
    xs, vals = [], []
    for i, s in enumerate(segs):
        if math.isfinite(s.lo):
            xs.append(s.lo)
            vals.append(s.log_at(s.lo))
        if math.isfinite(s.hi):
            xs.append(s.hi)
            vals.append(s.log_at(s.hi))
    if d.domain.is_ring:
        half = 0.5 * d.domain.circumference
        for x in list(xs):
            xa = float(d.domain.wrap(x + half))
            xs.append(xa)
            vals.append(float(d.log_pdf(xa)))
    xs_arr = np.array(xs)
    v = np.array(vals)
    dist = d.domain.distance(xs_arr[:, None], xs_arr[None, :])
    gap = v[:, None] - v[None, :] - eps * dist
    i, j = np.unravel_index(int(np.argmax(gap)), gap.shape)
    worst = max(float(gap[i, j]), 0.0)
    return PrivacyReport(bool(criterion), worst, (float(xs_arr[i]), float(xs_arr[j])))


def _check_local(d: PiecewiseExpDensity, eps: float) -> PrivacyReport:
    hi_val, hi_x = -math.inf, 0.0
    lo_val, lo_x = math.inf, 0.0
    for s in d.segments:
        for x in (s.lo, s.hi):
            if math.isinf(x):
                lo_val, lo_x = -math.inf, x
                continue
            v = s.log_at(x)
            if v > hi_val:
                hi_val, hi_x = v, x
            if v < lo_val:
                lo_val, lo_x = v, x
    spread = hi_val - lo_val
    return PrivacyReport(bool(spread <= eps + RATE_TOL), spread - eps, (hi_x, lo_x))


# -- expected cost ----------------------------------------------------------

def _cells(domain: Domain, offsets: Sequence[float]) -> List[Tuple[float, float, float]]:
    """Intervals ``(lo, hi, p)`` on which the nearest offset image is ``p`` and
    ``x - p`` keeps one sign. Ring offsets are unrolled onto ``[0, C)``."""
    pts = sorted(offsets)
    if domain.is_ring:
        c = domain.circumference
        pts = [float(domain.wrap(p)) for p in pts]
        pts = sorted(pts)
        images = [pts[-1] - c] + pts + [pts[0] + c]
        lo_bound, hi_bound = 0.0, c
    else:
        images = pts
        lo_bound, hi_bound = -math.inf, math.inf
    cells = []
    for i, p in enumerate(images):
        left = lo_bound if i == 0 else 0.5 * (images[i - 1] + p)
        right = hi_bound if i == len(images) - 1 else 0.5 * (p + images[i + 1])
        left, right = max(left, lo_bound), min(right, hi_bound)
        for a, b in ((left, min(p, right)), (max(p, left), right)):
            if b > a:
                cells.append((a, b, p))
    return cells


def _pieces(d: PiecewiseExpDensity, offsets: Sequence[float]):
    """Yield ``(segment, lo, hi, nearest)`` over the common refinement."""
    cells = _cells(d.domain, offsets)
    segs = d.segments
    i = j = 0
    while i < len(cells) and j < len(segs):
        a, b, p = cells[i]
        s = segs[j]
        lo, hi = max(a, s.lo), min(b, s.hi)
        if hi > lo:
            yield s, lo, hi, p
        if b < s.hi:
            i += 1
        elif s.hi < b:
            j += 1
        else:
            i += 1
            j += 1


def expected_min_disutility(d: PiecewiseExpDensity, A: OffsetLike, h: DisutilityFn = None) -> float:
    """E over x ~ d of min over a in A of h(dist(x, a)).

    Identity disutility is integrated exactly; anything else uses adaptive
    Simpson with forced breakpoints at segment boundaries, offsets and midpoints.
    """
    A = as_offsets(A)
    h = as_disutility(h)
    parts = []
    if h.is_identity:
        for s, lo, hi, p in _pieces(d, A.offsets):
            m = s.linear_moment(lo, hi, p)
            parts.append(m if lo >= p else -m)
    else:
        fn = h.fn
        for s, lo, hi, p in _pieces(d, A.offsets):
            if math.isinf(lo):
                lo = hi - TAIL_DECAY_LENGTHS / abs(s.rate)
            if math.isinf(hi):
                hi = lo + TAIL_DECAY_LENGTHS / abs(s.rate)
            lc, r = s.log_coeff, s.rate
            parts.append(adaptive_simpson(lambda x: float(fn(abs(x - p))) * math.exp(lc + r * x), lo, hi))
    return math.fsum(parts) / d.total_mass


# -- structural transformations ----------------------------------------------

def _full_intervals(offsets: Sequence[float], gamma: float) -> List[Tuple[float, float]]:
    merged: List[List[float]] = []
    for a in sorted(offsets):
        lo, hi = a - gamma, a + gamma
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]


def pieceexp_project(d: PiecewiseExpDensity, A: OffsetLike, gamma: float, eps: float) -> PiecewiseExpDensity:
    """Replace ``d`` by a density with rates in {-eps, +eps} that costs no more.

    Intervals within ``gamma`` of an offset (full) get the pointwise minimum of
    the two eps-exponentials through their endpoint values; the gaps between them
    (empty) get the pointwise maximum, and the unbounded ends decay at rate eps.
    """
    if d.domain.is_ring:
        raise NotImplementedError("projection is defined on the line only")
    A = as_offsets(A)
    report = check_privacy(d, eps, "geographic")
    if not report.satisfied:
        raise PrivacyViolated(f"input density is not {eps}-geographically private "
                              f"(worst log ratio {report.worst_ratio_log:.3g})")
    cost = expected_min_disutility(d, A)
    if not gamma > 0 or gamma < cost - 1e-12:
        raise ValueError(f"gamma={gamma} must be positive and at least the current cost {cost}")

    full = _full_intervals(A.offsets, gamma)
    logv = lambda x: float(d.log_pdf(x))
    segs: List[ExpSegment] = []

    def add(lo, hi, log_coeff, rate):
        if hi > lo:
            segs.append(ExpSegment(lo, hi, log_coeff, rate))

    t0 = full[0][0]
    add(-math.inf, t0, logv(t0) - eps * t0, eps)
    for n, (a, b) in enumerate(full):
        la, lb = logv(a), logv(b)
        x = min(max(0.5 * (a + b) + (lb - la) / (2 * eps), a), b)
        add(a, x, la - eps * a, eps)
        add(x, b, lb + eps * b, -eps)
        if n + 1 < len(full):
            c = full[n + 1][0]
            lc = logv(c)
            y = min(max(0.5 * (b + c) + (lb - lc) / (2 * eps), b), c)
            add(b, y, lb + eps * b, -eps)
            add(y, c, lc - eps * c, eps)
    tn = full[-1][1]
    add(tn, math.inf, logv(tn) + eps * tn, -eps)
    return normalize(segs, d.domain)


def space_removal(d: PiecewiseExpDensity, A: OffsetLike, a: float, b: float,
                  eps: Optional[float] = None) -> Tuple[PiecewiseExpDensity, OffsetSet]:
    """Delete ``[a, b)`` from the line and splice the halves together.

    Offsets left of ``a`` stay, offsets inside collapse onto ``a`` and offsets at
    or beyond ``b`` shift left by ``b - a``; coincident offsets merge. When
    ``eps`` is given the result is re-checked for geographic privacy.
    """
    if d.domain.is_ring:
        raise NotImplementedError("space removal is defined on the line only")
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    A = as_offsets(A)
    la, lb = float(d.log_pdf(a)), float(d.log_pdf(b))
    if abs(la - lb) > CONTINUITY_TOL:
        raise EndpointMismatch(f"rho(a) and rho(b) differ (log gap {la - lb:.3g})")
    width = b - a
    segs = []
    for s in d.segments:
        if s.lo < a:
            segs.append(ExpSegment(s.lo, min(s.hi, a), s.log_coeff, s.rate))
        if s.hi > b:
            segs.append(ExpSegment(max(s.lo, b), s.hi, s.log_coeff, s.rate).shifted(-width))
    # the splice point joins equal values; snap the tiny residual jump
    out = normalize(segs, d.domain, jumps=())
    moved = []
    for x in A.offsets:
        if x < a:
            moved.append(x)
        elif x < b:
            moved.append(a)
        else:
            moved.append(x - width)
    new_offsets = OffsetSet(sorted(set(moved)))
    if eps is not None:
        rep = check_privacy(out, eps, "geographic")
        if not rep.satisfied:
            raise PrivacyViolated("space removal broke geographic privacy")
    return out, new_offsets
