"""Client/server simulation of multi-selection with a newline-delimited JSON wire format.

The client adds noise to its private value and sends only the signal. The server
answers with the signal shifted by each offset. The client keeps the result
closest to its true value. The server sees nothing else, so its answers are as
private as the signal.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .common import TWO_PI, DisutilityFn, Domain, as_disutility, child_seed, make_rng, nearest_index
from .errors import DomainMismatch, InsufficientCounts, WireFormatError
from .mechanism import MechanismConfig

U64 = 1 << 64
MIN_BIN_COUNT = 50
SIM_BATCH = 1 << 16


@dataclass(frozen=True)
class SignalMsg:
    sid: int
    domain: str
    signal: float


@dataclass(frozen=True)
class ResponseMsg:
    sid: int
    results: Tuple[float, ...]


@dataclass(frozen=True)
class SelectionRecord:
    user_value: float
    signal: float
    results: Tuple[float, ...]
    chosen_index: int
    disutility: float
    sid: int = 0


Message = Union[SignalMsg, ResponseMsg, SelectionRecord]


def _dom(mech: MechanismConfig) -> str:
    return "ring" if mech.domain.is_ring else "line"


def client_signal(u: float, mech: MechanismConfig, rng, sid: int = 0) -> SignalMsg:
    u = float(u)
    if mech.domain.is_ring and not 0.0 <= u < mech.domain.circumference:
        raise DomainMismatch(f"ring user value must lie in [0, 2pi), got {u}")
    x = u + float(mech.noise.sample(make_rng(rng)))
    if mech.domain.is_ring:
        x = mech.domain.wrap(x)
    return SignalMsg(int(sid), _dom(mech), x)


def server_respond(msg: SignalMsg, mech: MechanismConfig) -> ResponseMsg:
    if msg.domain != _dom(mech):
        raise DomainMismatch(f"signal is on a {msg.domain}, mechanism on a {_dom(mech)}")
    rs = [msg.signal + a for a in mech.offsets]
    if mech.domain.is_ring:
        rs = [mech.domain.wrap(r) for r in rs]
    return ResponseMsg(msg.sid, tuple(float(r) for r in rs))


def pick_best(u: float, resp: ResponseMsg, h=None, domain: Domain = None,
              signal: float = math.nan) -> SelectionRecord:
    """Choose the result with the smallest disutility; ties go to the smaller index."""
    if not resp.results:
        raise ValueError("empty response")
    h = as_disutility(h)
    domain = domain or Domain.line()
    i = nearest_index(u, resp.results, domain)
    dist = domain.distance(u, resp.results[i])
    return SelectionRecord(float(u), float(signal), resp.results, i, float(h(dist)), resp.sid)


# -- wire format -----------------------------------------------------------------

def _check_sid(sid) -> int:
    if isinstance(sid, bool) or not isinstance(sid, int) or not 0 <= sid < U64:
        raise WireFormatError(f"sid must be an unsigned 64-bit integer, got {sid!r}")
    return sid


def _check_float(x) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise WireFormatError(f"expected a number, got {x!r}")
    x = float(x)
    if not math.isfinite(x):
        raise WireFormatError("non-finite number")
    return x


def to_wire(msg: Message) -> dict:
    if isinstance(msg, SignalMsg):
        return {"t": "sig", "sid": msg.sid, "dom": msg.domain, "x": float(msg.signal)}
    if isinstance(msg, ResponseMsg):
        return {"t": "resp", "sid": msg.sid, "rs": [float(r) for r in msg.results]}
    if isinstance(msg, SelectionRecord):
        return {"t": "sel", "sid": msg.sid, "u": msg.user_value, "x": msg.signal,
                "rs": [float(r) for r in msg.results], "i": msg.chosen_index, "c": msg.disutility}
    raise TypeError(f"not a message: {msg!r}")


def serialize(msg: Message) -> str:
    """One JSON line. Python's float repr is the shortest round-trip decimal."""
    return json.dumps(to_wire(msg), separators=(",", ":"), allow_nan=False)


def parse(line: str, k: Optional[int] = None) -> Message:
    """Inverse of ``serialize``; ``k`` enforces the response arity."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise WireFormatError(f"bad JSON: {e}") from None
    if not isinstance(obj, dict):
        raise WireFormatError("message must be a JSON object")
    t = obj.get("t")
    keys = set(obj)
    if t == "sig":
        if keys != {"t", "sid", "dom", "x"}:
            raise WireFormatError(f"bad sig fields {sorted(keys)}")
        if obj["dom"] not in ("line", "ring"):
            raise WireFormatError(f"unknown domain {obj['dom']!r}")
        x = _check_float(obj["x"])
        if obj["dom"] == "ring" and not 0.0 <= x < TWO_PI:
            raise WireFormatError(f"ring signal out of range: {x}")
        return SignalMsg(_check_sid(obj["sid"]), obj["dom"], x)
    if t == "resp":
        if keys != {"t", "sid", "rs"}:
            raise WireFormatError(f"bad resp fields {sorted(keys)}")
        rs = _results(obj["rs"], k)
        return ResponseMsg(_check_sid(obj["sid"]), rs)
    if t == "sel":
        if keys != {"t", "sid", "u", "x", "rs", "i", "c"}:
            raise WireFormatError(f"bad sel fields {sorted(keys)}")
        rs = _results(obj["rs"], k)
        i = obj["i"]
        if isinstance(i, bool) or not isinstance(i, int) or not 0 <= i < len(rs):
            raise WireFormatError(f"bad chosen index {i!r}")
        return SelectionRecord(_check_float(obj["u"]), _check_float(obj["x"]), rs, i,
                               _check_float(obj["c"]), _check_sid(obj["sid"]))
    raise WireFormatError(f"unknown message type {t!r}")


def _results(rs, k: Optional[int]) -> Tuple[float, ...]:
    if not isinstance(rs, list) or not rs:
        raise WireFormatError("rs must be a nonempty list")
    if k is not None and len(rs) != k:
        raise WireFormatError(f"expected {k} results, got {len(rs)}")
    return tuple(_check_float(r) for r in rs)


def write_messages(stream: IO[str], msgs: Iterable[Message]) -> None:
    for m in msgs:
        stream.write(serialize(m))
        stream.write("\n")


def read_messages(stream: IO[str], k: Optional[int] = None) -> List[Message]:
    return [parse(line, k) for line in stream if line.strip()]


# -- simulation ------------------------------------------------------------------

@dataclass(frozen=True)
class SimulationResult:
    mean: float
    stderr: float
    n: int


def _user_values(domain: Domain, rng, n: int) -> np.ndarray:
    if domain.is_ring:
        return rng.random(n) * domain.circumference
    return rng.uniform(-10.0, 10.0, n)


def _simulate_batch(mech: MechanismConfig, start: int, n: int, seed: int):
    rng = make_rng(seed)
    u = _user_values(mech.domain, rng, n)
    x = u + mech.noise.sample(rng, n)
    if mech.domain.is_ring:
        x = mech.domain.wrap(x)
    rs = x[:, None] + mech.offsets.as_array()[None, :]
    if mech.domain.is_ring:
        rs = mech.domain.wrap(rs)
    dist = mech.domain.distance(u[:, None], rs)
    # argmin returns the first minimum, which is the smallest-index tie rule
    idx = np.argmin(dist, axis=1)
    best = dist[np.arange(n), idx]
    cost = best if mech.h.is_identity else np.asarray(mech.h(best), dtype=float)
    return u, x, rs, idx, cost


def simulate(mech: MechanismConfig, n: int, seed: int, log: Optional[IO[str]] = None) -> SimulationResult:
    """Run ``n`` independent sessions with random user values.

    Sessions come in fixed batches, each with its own derived seed. With ``log``
    set, every session writes its sig, resp and sel lines.
    """
    n = int(n)
    total = []
    total_sq = []
    start = 0
    b = 0
    while start < n:
        m = min(SIM_BATCH, n - start)
        u, x, rs, idx, cost = _simulate_batch(mech, start, m, child_seed(seed, b))
        total.append(math.fsum(cost))
        total_sq.append(math.fsum(cost * cost))
        if log is not None:
            dom = _dom(mech)
            for j in range(m):
                sid = start + j
                results = tuple(float(r) for r in rs[j])
                log.write(serialize(SignalMsg(sid, dom, float(x[j]))) + "\n")
                log.write(serialize(ResponseMsg(sid, results)) + "\n")
                log.write(serialize(SelectionRecord(float(u[j]), float(x[j]), results, int(idx[j]),
                                                    float(cost[j]), sid)) + "\n")
        start += m
        b += 1
    mean = math.fsum(total) / n
    var = max(math.fsum(total_sq) / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return SimulationResult(mean, math.sqrt(var / n), n)


# -- privacy audit ----------------------------------------------------------------

@dataclass(frozen=True)
class AuditResult:
    max_log_ratio: float
    bound: float
    slack: float
    min_count: int
    bins: int

    @property
    def passed(self) -> bool:
        return self.max_log_ratio <= self.bound + self.slack


def _first_results(mech: MechanismConfig, u: float, n: int, seed: int) -> np.ndarray:
    rng = make_rng(seed)
    x = u + mech.noise.sample(rng, n) + mech.offsets[0]
    return mech.domain.wrap(x) if mech.domain.is_ring else x


def empirical_privacy_audit(mech: MechanismConfig, u1: float, u2: float, n: int = 10**6,
                            bins: int = 20, seed: int = 0) -> AuditResult:
    """Histogram the server's first result for two users and compare bin by bin.

    Bins are cut at pooled quantiles so every bin is well populated. The budget is
    ``eps * d(u1, u2)`` for geographic mechanisms and ``eps`` for local ones, and
    ``slack = 3 * sqrt(2 / min_count)`` allows for binomial noise.
    """
    a = _first_results(mech, u1, n, child_seed(seed, 1))
    b = _first_results(mech, u2, n, child_seed(seed, 2))
    pooled = np.concatenate([a, b])
    inner = np.quantile(pooled, np.linspace(0.0, 1.0, bins + 1)[1:-1])
    if mech.domain.is_ring:
        edges = np.concatenate([[0.0], inner, [mech.domain.circumference]])
    else:
        edges = np.concatenate([[-np.inf], inner, [np.inf]])
    ca, _ = np.histogram(a, edges)
    cb, _ = np.histogram(b, edges)
    min_count = int(min(ca.min(), cb.min()))
    if min_count < MIN_BIN_COUNT:
        raise InsufficientCounts(f"smallest bin holds {min_count} < {MIN_BIN_COUNT} draws")
    ratio = float(np.max(np.abs(np.log(ca / cb))))
    d = float(mech.domain.distance(u1, u2))
    if mech.metric == "local":
        bound = mech.eps if d > 0 else 0.0
    else:
        bound = mech.eps * d
    return AuditResult(ratio, bound, 3.0 * math.sqrt(2.0 / min_count), min_count, bins)
