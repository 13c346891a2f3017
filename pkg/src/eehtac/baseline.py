"""EULC-style layered clustering baseline: weighted CH score, no backup heads."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import ClusterTopology, log_message, apply_roles, join, poll, same_layer_neighbours
from .environment import World
from .messages import Hello


@dataclass(frozen=True)
class EulcWeights:
    alpha: float  # residual energy
    beta: float  # neighbour density
    gamma: float  # closeness to the sink

    def __post_init__(self):
        parts = (self.alpha, self.beta, self.gamma)
        if min(parts) < 0:
            raise ValueError("weights must be non-negative")
        if abs(sum(parts) - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {sum(parts)!r}, expected 1")

    def scaled(self, k: float) -> "EulcWeights":
        """Scale by ``k`` and renormalize (same weights back)."""
        raw = (self.alpha * k, self.beta * k, self.gamma * k)
        s = sum(raw)
        return EulcWeights(raw[0] / s, raw[1] / s, 1.0 - raw[0] / s - raw[1] / s)


PRESETS = {
    "eulc1": EulcWeights(0.2, 0.3, 0.5),
    "eulc2": EulcWeights(0.1, 0.5, 0.4),
    "eulc3": EulcWeights(0.4, 0.3, 0.3),
    "eulc4": EulcWeights(0.4, 0.4, 0.2),
}


def eulc_score(energy_ratio: float, density: float, sink_distance_norm: float,
               weights: EulcWeights) -> float:
    for name, v in (("energy_ratio", energy_ratio), ("density", density),
                    ("sink_distance_norm", sink_distance_norm)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")
    return (weights.alpha * energy_ratio + weights.beta * density
            + weights.gamma * (1.0 - sink_distance_norm))


def _max_sink_distance(world: World) -> float:
    sink = np.asarray(world.cfg.sink_position)
    corners = np.array([[x, y, z] for x in (0, world.cfg.region[0])
                        for y in (0, world.cfg.region[1]) for z in (0, world.cfg.region[2])])
    return float(np.max(np.linalg.norm(corners - sink, axis=1)))


def node_scores(world: World, alive: list[int], neigh: dict[int, tuple[int, ...]],
                weights: EulcWeights) -> dict[int, float]:
    far = _max_sink_distance(world)
    peak: dict[int, int] = {}
    for t in alive:
        layer = world.node(t).layer
        peak[layer] = max(peak.get(layer, 0), len(neigh[t]))
    scores = {}
    for t in alive:
        node = world.node(t)
        top = peak[node.layer]
        density = len(neigh[t]) / top if top else 0.0
        gap = min(1.0, world.d_point(t, world.cfg.sink_position) / far)
        scores[t] = eulc_score(node.energy_rsd / node.energy_init, density, gap, weights)
    return scores


def eulc_setup_phase(world: World, weights: EulcWeights) -> ClusterTopology:
    """Local score maxima within CTR on each layer become CHs; others join the nearest."""
    alive = world.alive_tags()
    neigh = same_layer_neighbours(world, alive)
    scores = node_scores(world, alive, neigh, weights)
    topo = ClusterTopology(adjacency=neigh)
    for t in alive:
        node = world.node(t)
        log_message(world, Hello(t, node.layer, scores[t], node.energy_rsd))
        world.broadcast_control(t)
    hearing: dict[int, list[int]] = {t: [] for t in alive}
    fit = {t for t in alive if world.node(t).energy_rsd > world.params.e_surv}
    for t in sorted(fit):
        rank = (-scores[t], t)
        if all(rank < (-scores[k], k) for k in neigh[t] if k in fit):
            topo.primaries.add(t)
            topo.rad[t] = world.cfg.ctr
            world.log.emit("role", tag=t, role="PrimaryCH")
    for p in sorted(topo.primaries):
        for h in poll(world, p, world.cfg.ctr, scores[p]):
            hearing[h].append(p)
    for t in sorted(set(alive) - topo.primaries):
        options = [p for p in hearing[t] if p in topo.primaries]
        if not options:
            topo.orphans.add(t)
            continue
        join(world, topo, t, min(options, key=lambda p: (world.d(t, p), p)))
    populated = {world.node(t).layer for t in alive}
    staffed = {world.node(p).layer for p in topo.primaries}
    for layer in sorted(populated - staffed):
        world.log.emit("ContentionStall", layer=layer)
    apply_roles(world, topo)
    return topo


def eulc_round(sim):
    """Advance a baseline simulation by one round; returns (topology, ledger row)."""
    if sim.cfg.protocol not in PRESETS:
        raise ValueError("simulation is not running a baseline protocol")
    row = sim.step()
    return sim.topology, row

