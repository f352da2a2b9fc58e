"""A complete multi-selection mechanism: noise density plus server offsets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .common import LINE, RING, DisutilityFn, Domain, OffsetSet, as_disutility
from .density import ExpSegment, PiecewiseExpDensity, check_privacy, expected_min_disutility, normalize
from .line_mech import closed_form_cost, laplace_density, optimal_offsets_closed, optimal_offsets_recurrence
from .ring_mech import geo_ring_optimize_k2, local_ring_mechanism, two_level_density, local_beta


@dataclass(frozen=True)
class MechanismConfig:
    """``metric`` is the privacy notion the noise is meant to satisfy:
    "geographic" (eps per unit distance) or "local" (eps between any inputs)."""

    eps: float
    k: int
    domain: Domain
    noise: PiecewiseExpDensity
    offsets: OffsetSet
    h: DisutilityFn = field(default_factory=DisutilityFn.identity)
    metric: str = "geographic"
    name: str = ""

    def __post_init__(self):
        if len(self.offsets) != self.k:
            raise ValueError(f"expected {self.k} offsets, got {len(self.offsets)}")
        if self.noise.domain != self.domain:
            raise ValueError("noise and mechanism domains differ")

    def exact_cost(self) -> float:
        return expected_min_disutility(self.noise, self.offsets, self.h)

    def privacy(self):
        return check_privacy(self.noise, self.eps, self.metric)

    def with_noise(self, noise: PiecewiseExpDensity, name: str = "") -> "MechanismConfig":
        return replace(self, noise=noise, name=name or self.name)


def line_mechanism(eps: float, k: int, h=None) -> MechanismConfig:
    """Laplace noise with the optimal offsets (closed form for identity h)."""
    h = as_disutility(h)
    if h.is_identity:
        offsets = optimal_offsets_closed(eps, k)
    else:
        offsets, _ = optimal_offsets_recurrence(eps, k, h)
    return MechanismConfig(float(eps), int(k), LINE, laplace_density(eps), offsets, h, "geographic", "line")


def ring_local_mechanism(eps: float, k: int) -> MechanismConfig:
    mech, _ = local_ring_mechanism(eps, k)
    return MechanismConfig(float(eps), int(k), RING, mech.density, mech.offsets,
                           DisutilityFn.identity(), "local", "ring-local")


def ring_geo_mechanism(eps: float, t_grid: int = 512) -> MechanismConfig:
    _, _, density, offsets = geo_ring_optimize_k2(eps, t_grid)
    return MechanismConfig(float(eps), 2, RING, density, offsets,
                           DisutilityFn.identity(), "geographic", "ring-geo")


def corrupted(mech: MechanismConfig, factor: float = 2.0) -> MechanismConfig:
    """Same claimed budget, but noise that is ``factor`` times too concentrated."""
    if mech.name == "ring-local":
        noise = two_level_density(factor * mech.eps, mech.k, local_beta(mech.eps))
    else:
        segs = [ExpSegment(s.lo, s.hi, s.log_coeff * factor, s.rate * factor) for s in mech.noise.segments]
        noise = normalize(segs, mech.domain, mech.noise.jumps)
    return mech.with_noise(noise, name=mech.name + "-corrupted")


def certified_cost(mech: MechanismConfig) -> float:
    """Analytic cost for the shipped mechanisms, exact integration otherwise."""
    if mech.name == "line" and mech.h.is_identity:
        return closed_form_cost(mech.eps, mech.k)
    if mech.name == "ring-local":
        return local_ring_mechanism(mech.eps, mech.k)[1]
    return mech.exact_cost()
