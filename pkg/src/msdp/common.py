"""Small value types shared by every mechanism module."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from .errors import EmptyOffsets, InvalidDisutility

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Domain:
    """Either the real line or a ring of the given circumference."""

    kind: str = "line"
    circumference: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("line", "ring"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "ring":
            c = TWO_PI if self.circumference is None else float(self.circumference)
            if not c > 0:
                raise ValueError("ring circumference must be positive")
            object.__setattr__(self, "circumference", c)
        elif self.circumference is not None:
            raise ValueError("a line has no circumference")

    @classmethod
    def line(cls) -> "Domain":
        return cls("line")

    @classmethod
    def ring(cls, circumference: float = TWO_PI) -> "Domain":
        return cls("ring", circumference)

    @property
    def is_ring(self) -> bool:
        return self.kind == "ring"

    def distance(self, x, y):
        """Geodesic distance; works elementwise on arrays."""
        diff = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        if self.is_ring:
            diff = np.mod(diff, self.circumference)
            diff = np.minimum(diff, self.circumference - diff)
        return diff if diff.ndim else float(diff)

    def wrap(self, x):
        if not self.is_ring:
            return x
        w = np.mod(x, self.circumference)
        # fmod can land exactly on the circumference for tiny negative inputs
        w = np.where(w >= self.circumference, 0.0, w)
        return w if np.ndim(w) else float(w)

    def to_json(self) -> dict:
        if self.is_ring:
            return {"kind": "ring", "circumference": self.circumference}
        return {"kind": "line"}

    @classmethod
    def from_json(cls, obj) -> "Domain":
        if isinstance(obj, str):
            return cls(obj)
        return cls(obj["kind"], obj.get("circumference"))


LINE = Domain.line()
RING = Domain.ring()


@dataclass(frozen=True)
class OffsetSet:
    """Sorted, strictly increasing server result offsets."""

    offsets: tuple

    def __init__(self, offsets: Iterable[float]):
        vals = tuple(float(x) for x in offsets)
        if not vals:
            raise EmptyOffsets("offset set must be nonempty")
        if any(not math.isfinite(x) for x in vals):
            raise ValueError("offsets must be finite")
        vals = tuple(sorted(vals))
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError(f"offsets must be distinct: {vals}")
        object.__setattr__(self, "offsets", vals)

    def __iter__(self) -> Iterator[float]:
        return iter(self.offsets)

    def __len__(self) -> int:
        return len(self.offsets)

    def __getitem__(self, i):
        return self.offsets[i]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.offsets, dtype=float)

    def shifted(self, delta: float, domain: Domain = LINE) -> "OffsetSet":
        return OffsetSet(domain.wrap(np.asarray(self.offsets) + delta))


OffsetLike = Union[OffsetSet, Sequence[float], np.ndarray]


def as_offsets(a: OffsetLike) -> OffsetSet:
    if isinstance(a, OffsetSet):
        return a
    vals = list(np.atleast_1d(np.asarray(a, dtype=float)))
    if not vals:
        raise EmptyOffsets("offset set must be nonempty")
    return OffsetSet(vals)


def _identity(t):
    return t


def _square(t):
    return t * t


def _sqrt(t):
    return np.sqrt(t)


_BUILTIN = {"identity": _identity, "sqrt": _sqrt, "square": _square}


@dataclass(frozen=True)
class DisutilityFn:
    """Monotone cost of distance with h(0) = 0.

    Custom callables are checked on the grid (0, 100] with step 0.01; the
    log-Lipschitz growth condition is not enforced.
    """

    tag: str = "identity"
    fn: Callable = field(default=_identity, compare=False, repr=False)

    def __post_init__(self):
        if self.tag in _BUILTIN:
            object.__setattr__(self, "fn", _BUILTIN[self.tag])
        elif self.tag == "custom":
            self._validate()
        else:
            raise InvalidDisutility(f"unknown disutility tag {self.tag!r}")

    @classmethod
    def identity(cls) -> "DisutilityFn":
        return cls("identity")

    @classmethod
    def sqrt(cls) -> "DisutilityFn":
        return cls("sqrt")

    @classmethod
    def square(cls) -> "DisutilityFn":
        return cls("square")

    @classmethod
    def custom(cls, fn: Callable) -> "DisutilityFn":
        return cls("custom", fn)

    @classmethod
    def named(cls, name: str) -> "DisutilityFn":
        return cls(name.lower())

    @property
    def is_identity(self) -> bool:
        return self.tag == "identity"

    def _validate(self):
        if abs(float(self.fn(0.0))) > 1e-12:
            raise InvalidDisutility("h(0) must be 0")
        grid = np.arange(1, 10001) * 0.01
        try:
            vals = np.asarray(self.fn(grid), dtype=float)
            if vals.shape != grid.shape:
                raise TypeError
        except Exception:
            vals = np.array([float(self.fn(float(t))) for t in grid])
        if not np.all(np.isfinite(vals)) or vals[0] <= 0 or np.any(np.diff(vals) <= 0):
            raise InvalidDisutility("h must be strictly increasing on (0, 100]")

    def __call__(self, t):
        return self.fn(t)


IDENTITY = DisutilityFn.identity()


def as_disutility(h) -> DisutilityFn:
    if h is None:
        return IDENTITY
    if isinstance(h, DisutilityFn):
        return h
    if isinstance(h, str):
        return DisutilityFn.named(h)
    if callable(h):
        return DisutilityFn.custom(h)
    raise InvalidDisutility(f"cannot interpret {h!r} as a disutility")


def child_seed(parent: int, index: int) -> int:
    """Derive a 64-bit child seed; equal inputs give equal outputs on every platform."""
    ss = np.random.SeedSequence(entropy=int(parent) & (2**64 - 1), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(int(seed) & (2**64 - 1)))


def nearest_index(x: float, points: Sequence[float], domain: Domain = LINE) -> int:
    """Index of the point nearest to ``x``; ties go to the smallest index."""
    best_i, best_d = 0, math.inf
    for i, p in enumerate(points):
        d = domain.distance(x, p)
        if d < best_d:
            best_i, best_d = i, d
    return best_i
