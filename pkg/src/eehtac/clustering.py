"""Per-node clustering mathematics.

Water-quality weights, electability factor, CH retention period, depth
layering and the competition radius. Everything here is a pure function.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

TURBIDITY_MAX_NTU = 2000.0
PH_MAX = 14.0
# admissible (drinking-water) ranges
TURBIDITY_ADMISSIBLE_NTU = 5.0
PH_ADMISSIBLE = (6.5, 9.5)

WEIGHT_SUM_TOL = 1e-9


class WeightDegenerate(ValueError):
    """All four normalized magnitudes are zero."""


class Role(enum.Enum):
    ORDINARY = "Ordinary"
    CM = "CM"
    PRIMARY = "PrimaryCH"
    SUBSIDIARY = "SubsidiaryCH"
    BONDING = "BondingCH"


class PriorityMode(enum.Enum):
    LOW_TAG = "low"
    HIGH_TAG = "high"


class P4Variant(enum.Enum):
    LITERAL = "literal"
    COMPLEMENTARY = "complementary"


class RadiusMode(enum.Enum):
    LITERAL = "literal"
    CLAMPED = "clamped"


@dataclass(frozen=True)
class AqpReading:
    turbidity: float  # NTU
    ph: float

    def __post_init__(self):
        if not 0.0 <= self.turbidity <= TURBIDITY_MAX_NTU:
            raise ValueError(f"turbidity {self.turbidity} NTU outside [0, {TURBIDITY_MAX_NTU}]")
        if not 0.0 <= self.ph <= PH_MAX:
            raise ValueError(f"pH {self.ph} outside [0, {PH_MAX}]")

    @property
    def admissible(self) -> bool:
        lo, hi = PH_ADMISSIBLE
        return self.turbidity <= TURBIDITY_ADMISSIBLE_NTU and lo <= self.ph <= hi


@dataclass
class NodeState:
    tag: int
    position: tuple[float, float, float]
    energy_init: float
    energy_rsd: float
    aqp: AqpReading
    mobility_speed: float = 0.0
    role: Role = Role.ORDINARY
    layer: int = 1
    ch_history: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.tag < 1:
            raise ValueError("tags start at 1")
        if not 0.0 <= self.energy_rsd <= self.energy_init:
            raise ValueError("residual energy must lie in [0, energy_init]")
        if self.mobility_speed < 0:
            raise ValueError("mobility speed must be >= 0")

    @property
    def depth(self) -> float:
        return self.position[2]

    @property
    def is_ch(self) -> int:
        return 1 if self.role is Role.PRIMARY else 0

    def push_history(self, indicator: int, k: int) -> None:
        self.ch_history.append(int(indicator))
        if len(self.ch_history) > k:
            del self.ch_history[: len(self.ch_history) - k]


@dataclass(frozen=True)
class NetworkParams:
    node_count: int
    region: tuple[float, float, float]
    total_layers: int
    ctr: float = 60.0
    k_layer: int = 1
    t_cmp: float = 90.0
    t_adv: float = 1.0
    avb_set: float = 0.05
    e_surv: float = 0.1
    srl: int = 3
    priority_mode: PriorityMode = PriorityMode.LOW_TAG
    p4_variant: P4Variant = P4Variant.LITERAL

    def __post_init__(self):
        if not 1 <= self.k_layer <= 5:
            raise ValueError("k_layer must lie in [1, 5]")
        if self.ctr <= 0:
            raise ValueError("ctr must be positive")
        if self.avb_set < 0:
            raise ValueError("avb_set must be >= 0")
        if self.srl < 1:
            raise ValueError("srl must be >= 1")

    @property
    def region_depth(self) -> float:
        return self.region[2]


@dataclass(frozen=True)
class WeightVector:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        parts = (self.a, self.b, self.c, self.d)
        if min(parts) < 0:
            raise ValueError("weights must be non-negative")
        if abs(sum(parts) - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {sum(parts)!r}, expected 1")

    @classmethod
    def uniform(cls) -> "WeightVector":
        return cls(0.25, 0.25, 0.25, 0.25)


@dataclass(frozen=True)
class NeighborRecord:
    tag: int
    adj: int
    is_ch: int
    is_covered: int
    avb: float


@dataclass(frozen=True)
class NeighborhoodSnapshot:
    """What a node knows about the rest of the network at round start.

    ``records`` may list every other node (with ``adj = 0`` for non-neighbours)
    or only the adjacent ones; nodes absent from ``records`` are treated as
    non-adjacent. ``network_size`` is N, which fixes the tag range 1..N.
    """

    focal: int
    network_size: int
    records: tuple[NeighborRecord, ...] = ()

    @property
    def neighbor_count(self) -> int:
        return sum(1 for r in self.records if r.adj)


def unit_step(x: float) -> int:
    return 1 if x > 0 else 0


def normalized_weights(aqp: AqpReading, energy_rsd: float, energy_init: float,
                       depth: float, region_depth: float) -> WeightVector:
    """Relative weights (A, B, C, D) of turbidity, pH, residual energy and depth.

    Each raw quantity is normalized by its physical maximum before the
    four magnitudes are shared out.
    """
    if region_depth <= 0 or energy_init <= 0:
        raise ValueError("region_depth and energy_init must be positive")
    norms = (
        aqp.turbidity / TURBIDITY_MAX_NTU,
        aqp.ph / PH_MAX,
        energy_rsd / energy_init,
        depth / region_depth,
    )
    total = sum(norms)
    if total <= 0.0:
        raise WeightDegenerate("all normalized magnitudes are zero")
    a, b, c = (n / total for n in norms[:3])
    # d by complement keeps the sum exact to rounding
    d = max(0.0, 1.0 - a - b - c)
    return WeightVector(a, b, c, d)


def safe_weights(aqp: AqpReading, energy_rsd: float, energy_init: float,
                 depth: float, region_depth: float) -> WeightVector:
    try:
        return normalized_weights(aqp, energy_rsd, energy_init, depth, region_depth)
    except WeightDegenerate:
        return WeightVector.uniform()


def priority_term(tag: int, n: int, mode: PriorityMode,
                  variant: P4Variant = P4Variant.LITERAL) -> float:
    if mode is PriorityMode.HIGH_TAG:
        return tag / n
    if variant is P4Variant.COMPLEMENTARY:
        return (n - tag) / n
    return (1 - tag) / n


def adjacency_term(adjacent_count: int, n: int) -> float:
    return adjacent_count / (n - 1) if n > 1 else 0.0


def electability_terms(mobility_speed: float, adjacent_count: int, tcl: float, tag: int,
                       params: NetworkParams) -> tuple[float, float, float, float]:
    n = params.node_count
    return (
        math.exp(-mobility_speed),
        adjacency_term(adjacent_count, n),
        1.0 - tcl,
        priority_term(tag, n, params.priority_mode, params.p4_variant),
    )


def electability_factor(node: NodeState, snapshot: NeighborhoodSnapshot, weights: WeightVector,
                        tcl: float, params: NetworkParams) -> float:
    if not 0.0 <= tcl <= 1.0:
        raise ValueError("tcl must lie in [0, 1]")
    if snapshot.focal != node.tag:
        raise ValueError("snapshot belongs to a different node")
    p1, p2, p3, p4 = electability_terms(node.mobility_speed, snapshot.neighbor_count, tcl,
                                        node.tag, params)
    return weights.a * p1 + weights.b * p2 + weights.c * p3 + weights.d * p4


def retention_period(energy_rsd: float, energy_init: float, t_cmp: float, rnd: float) -> float:
    """How long a node waits/retains before CH contention, clamped at zero."""
    if not 0.0 <= energy_rsd <= energy_init:
        raise ValueError("energy_rsd must lie in [0, energy_init]")
    if not 0.5 <= rnd <= 1.0:
        raise ValueError("rnd must lie in [0.5, 1]")
    raw = t_cmp * (energy_rsd / energy_init - 1.0) + rnd * t_cmp
    return max(0.0, raw)


def layer_number(depth: float, ctr: float, k_layer: int) -> int:
    if ctr <= 0:
        raise ValueError("ctr must be positive")
    if not 1 <= k_layer <= 5:
        raise ValueError("k_layer must lie in [1, 5]")
    return math.ceil(max(depth, 0.0) / ctr) + k_layer


def total_layers(region_depth: float, ctr: float, k_layer: int) -> int:
    return layer_number(region_depth, ctr, k_layer)


def competition_radius(energy_rsd: float, energy_init: float, weights: WeightVector, ctr: float,
                       layer: int, total_layers: int,
                       mode: RadiusMode = RadiusMode.CLAMPED) -> float:
    if total_layers < 1 or layer > total_layers:
        raise ValueError("layer must not exceed total_layers")
    radius = (weights.c * energy_rsd / energy_init) * (ctr * weights.d * layer / total_layers)
    if mode is RadiusMode.CLAMPED:
        return min(max(radius, 0.1 * ctr), ctr)
    return radius


def weights_sum(w: WeightVector | Sequence[float]) -> float:
    if isinstance(w, WeightVector):
        return w.a + w.b + w.c + w.d
    return float(sum(w))
