"""Deployment, mobility, water-quality drift and the mutable world of one run."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Any

import numpy as np

from .acoustics import propagation_delay, transmission_time
from .clustering import AqpReading, NodeState, layer_number
from .config import ScenarioConfig

# named random substreams; toggling one feature never perturbs another
STREAMS = {"deploy": 1, "mobility": 2, "retention": 3, "faults": 4, "aqp": 5}

TURBIDITY_WALK = (0.0, 5.0, 0.1)  # lo, hi, step sd
PH_WALK = (6.5, 9.5, 0.05)


def substreams(seed: int) -> dict[str, np.random.Generator]:
    return {name: np.random.default_rng([seed, sid]) for name, sid in STREAMS.items()}


class EventLog:
    """Line-oriented JSON event records with a round stamp.

    Message-level records are only kept when ``level == "messages"``, but
    control traffic is always counted.
    """

    def __init__(self, level: str = "events", sink: IO[str] | None = None):
        self.level = level
        self.records: list[dict[str, Any]] = []
        self.sink = sink
        self.round = 0

    def emit(self, kind: str, **fields: Any) -> dict[str, Any]:
        rec = {"round": self.round, "kind": kind, **fields}
        if self.sink is not None:
            self.sink.write(json.dumps(rec, sort_keys=True) + "\n")
        self.records.append(rec)
        return rec

    def compact(self) -> None:
        """Drop retained records once consumed (streamed runs keep memory flat)."""
        if self.sink is not None:
            self.records.clear()


@dataclass
class World:
    cfg: ScenarioConfig
    nodes: list[NodeState]
    pos: np.ndarray
    rngs: dict[str, np.random.Generator]
    log: EventLog
    failed: np.ndarray = None
    current_heading: float = 0.0
    time: float = 0.0
    round: int = 0
    consumed: float = 0.0  # cumulative energy charged
    round_energy: float = 0.0
    round_control: int = 0
    dist: np.ndarray = None

    def __post_init__(self):
        self.params = self.cfg.network_params()
        self.energy = self.cfg.energy_model()
        n = len(self.nodes)
        if self.failed is None:
            self.failed = np.zeros(n, dtype=bool)
        self.refresh_geometry()

    # geometry
    def refresh_geometry(self) -> None:
        diff = self.pos[:, None, :] - self.pos[None, :, :]
        self.dist = np.sqrt((diff ** 2).sum(axis=-1))
        for node, p in zip(self.nodes, self.pos):
            node.position = (float(p[0]), float(p[1]), float(p[2]))
            node.layer = layer_number(float(p[2]), self.cfg.ctr, self.cfg.k_layer)

    def d(self, a: int, b: int) -> float:
        return float(self.dist[a - 1, b - 1])

    def d_point(self, tag: int, point) -> float:
        return float(np.linalg.norm(self.pos[tag - 1] - np.asarray(point, dtype=float)))

    def node(self, tag: int) -> NodeState:
        return self.nodes[tag - 1]

    def alive(self, tag: int) -> bool:
        return not self.failed[tag - 1] and self.nodes[tag - 1].energy_rsd > 0

    def alive_tags(self) -> list[int]:
        return [n.tag for n in self.nodes if self.alive(n.tag)]

    def in_upper_tier(self, tag: int) -> bool:
        return self.node(tag).layer <= self.cfg.k_layer + self.cfg.upper_tier_layers

    # energy
    def charge(self, tag: int, joules: float) -> float:
        node = self.nodes[tag - 1]
        if self.failed[tag - 1] or joules <= 0:
            return 0.0
        spent = min(joules, node.energy_rsd)
        node.energy_rsd -= spent
        self.consumed += spent
        self.round_energy += spent
        return spent

    @property
    def control_bits(self) -> int:
        return self.cfg.control_bytes * 8

    @property
    def packet_bits(self) -> int:
        return self.cfg.packet_bytes * 8

    def send_control(self, sender: int, distance: float, receivers=()) -> None:
        self.round_control += 1
        self.charge(sender, self.energy.tx_energy(self.control_bits, distance))
        rx = self.energy.rx_energy(self.control_bits)
        for r in receivers:
            self.charge(r, rx)

    def broadcast_control(self, sender: int) -> list[int]:
        """Control broadcast at CTR power; returns the alive nodes in range."""
        row = self.dist[sender - 1]
        hearers = [j + 1 for j in np.flatnonzero(row <= self.cfg.ctr)
                   if j + 1 != sender and self.alive(j + 1)]
        self.send_control(sender, self.cfg.ctr, hearers)
        return hearers

    def hop_delay(self, bits: int, distance: float) -> float:
        return (transmission_time(bits, self.cfg.data_rate) + propagation_delay(distance)
                + self.cfg.proc_delay)

    @property
    def control_airtime(self) -> float:
        return transmission_time(self.control_bits, self.cfg.data_rate)


def deploy(cfg: ScenarioConfig, rng: np.random.Generator) -> tuple[list[NodeState], np.ndarray]:
    """Uniform random placement with a random permutation of tags 1..N."""
    n = cfg.node_count
    ext = np.asarray(cfg.region, dtype=float)
    pos = rng.uniform(0.0, 1.0, size=(n, 3)) * ext
    tags = rng.permutation(n) + 1
    # index i holds tag i + 1
    order = np.argsort(tags)
    pos = pos[order]
    tbd = rng.uniform(TURBIDITY_WALK[0], TURBIDITY_WALK[1], size=n)
    ph = rng.uniform(PH_WALK[0], PH_WALK[1], size=n)
    nodes = []
    for i in range(n):
        nodes.append(NodeState(
            tag=i + 1,
            position=tuple(float(v) for v in pos[i]),
            energy_init=cfg.e_init,
            energy_rsd=cfg.e_init,
            aqp=AqpReading(float(tbd[i]), float(ph[i])),
            layer=layer_number(float(pos[i, 2]), cfg.ctr, cfg.k_layer),
        ))
    return nodes, pos


def _reflect(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    span = hi - lo
    if span <= 0:
        return np.full_like(x, lo)
    y = np.mod(x - lo, 2 * span)
    return lo + np.where(y > span, 2 * span - y, y)


def advance_mobility(pos: np.ndarray, dt: float, heading: float, current_speed: float,
                     jitter: float, region, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Drift every node with a uniform horizontal current plus isotropic jitter.

    Positions are reflected at the region walls. Returns the new positions
    and each node's speed (displacement / dt).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    step = np.zeros_like(pos)
    step[:, 0] = current_speed * math.cos(heading) * dt
    step[:, 1] = current_speed * math.sin(heading) * dt
    if jitter > 0:
        step += rng.normal(0.0, jitter * dt, size=pos.shape)
    moved = pos + step
    for axis in range(3):
        moved[:, axis] = _reflect(moved[:, axis], 0.0, float(region[axis]))
    speed = np.linalg.norm(moved - pos, axis=1) / dt
    return moved, speed


def walk_aqp(nodes: list[NodeState], rng: np.random.Generator) -> None:
    """Bounded random walk of turbidity and pH within the admissible ranges."""
    n = len(nodes)
    tbd = np.array([node.aqp.turbidity for node in nodes]) + rng.normal(0.0, TURBIDITY_WALK[2], n)
    ph = np.array([node.aqp.ph for node in nodes]) + rng.normal(0.0, PH_WALK[2], n)
    tbd = _reflect(tbd, *TURBIDITY_WALK[:2])
    ph = _reflect(ph, *PH_WALK[:2])
    for node, a, b in zip(nodes, tbd, ph):
        node.aqp = AqpReading(float(a), float(b))


def build_world(cfg: ScenarioConfig, log: EventLog | None = None) -> World:
    rngs = substreams(cfg.seed)
    nodes, pos = deploy(cfg, rngs["deploy"])
    heading = float(rngs["mobility"].uniform(0.0, 2 * math.pi))
    return World(cfg=cfg, nodes=nodes, pos=pos, rngs=rngs, log=log or EventLog(cfg.log_level),
                 current_heading=heading)
