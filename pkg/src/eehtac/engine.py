"""Round protocol: advertisement, CH contention, joining, failure detection and recovery."""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field

import numpy as np

from .acoustics import propagation_delay
from .clustering import (NeighborhoodSnapshot, NeighborRecord, Role, competition_radius,
                         electability_terms, retention_period, safe_weights)
from .election import Scenario, elect
from .environment import World
from .messages import Ack, Hello, Join, Polling, as_record
from .metrics import tcl


class FailureCause(enum.Enum):
    ENERGY = "EnergyBelowSurv"
    RETRANSMIT = "JoinRetransmitExceeded"


class RecoveryPath(enum.Enum):
    FTBC1 = "FTBC1"
    FTBC2 = "FTBC2"
    UNRECOVERED = "Unrecovered"


@dataclass
class FailureRecord:
    failed_tag: int
    cause: FailureCause
    path: RecoveryPath | None = None
    rounds_to_recover: int | None = None
    promoted: int | None = None
    ftbc1_checked: bool = False


@dataclass
class ClusterTopology:
    primaries: set[int] = field(default_factory=set)
    members: dict[int, int] = field(default_factory=dict)  # member -> primary
    subsidiary: dict[int, int] = field(default_factory=dict)  # primary -> subsidiary
    bonding: set[int] = field(default_factory=set)
    orphans: set[int] = field(default_factory=set)
    rad: dict[int, float] = field(default_factory=dict)
    adjacency: dict[int, tuple[int, ...]] = field(default_factory=dict)

    def cluster(self, primary: int) -> list[int]:
        return sorted(m for m, p in self.members.items() if p == primary)

    def role_of(self, tag: int) -> Role:
        if tag in self.primaries:
            return Role.PRIMARY
        if tag in self.bonding:
            return Role.BONDING
        if tag in self.members:
            p = self.members[tag]
            return Role.SUBSIDIARY if self.subsidiary.get(p) == tag else Role.CM
        return Role.ORDINARY

    def by_layer(self, world: World) -> dict[int, dict[str, list[int]]]:
        out: dict[int, dict[str, list[int]]] = {}
        for p in sorted(self.primaries):
            cell = out.setdefault(world.node(p).layer, {"primary": [], "subsidiary": [],
                                                          "bonding": []})
            cell["primary"].append(p)
            if p in self.subsidiary:
                cell["subsidiary"].append(self.subsidiary[p])
        for b in sorted(self.bonding):
            out.setdefault(world.node(b).layer, {"primary": [], "subsidiary": [],
                                                 "bonding": []})["bonding"].append(b)
        return out

    def drop_primary(self, primary: int) -> list[int]:
        """Remove a primary and its cluster; returns the former members."""
        self.primaries.discard(primary)
        self.rad.pop(primary, None)
        self.subsidiary.pop(primary, None)
        former = self.cluster(primary)
        for m in former:
            del self.members[m]
        return former

    def attach(self, member: int, primary: int) -> None:
        self.orphans.discard(member)
        self.members[member] = primary

    def check_partition(self, alive: list[int]) -> None:
        for tag in alive:
            slots = (tag in self.primaries) + (tag in self.members) + (tag in self.bonding)
            if slots > 1:
                raise AssertionError(f"node {tag} holds {slots} roles")
        for m, p in self.members.items():
            if p not in self.primaries:
                raise AssertionError(f"member {m} points at non-primary {p}")


def apply_roles(world: World, topo: ClusterTopology) -> None:
    for node in world.nodes:
        node.role = topo.role_of(node.tag) if world.alive(node.tag) else Role.ORDINARY


# signalling helpers

def log_message(world: World, msg, **extra) -> None:
    if world.log.level == "messages":
        kind, body = as_record(msg)
        world.log.emit(kind, **body, **extra)


def node_avb(world: World, tag: int, neighbour_count: int) -> float:
    node = world.node(tag)
    p = world.params
    w = safe_weights(node.aqp, node.energy_rsd, node.energy_init, node.depth, p.region_depth)
    t = electability_terms(node.mobility_speed, neighbour_count, tcl(node.ch_history), tag, p)
    return w.a * t[0] + w.b * t[1] + w.c * t[2] + w.d * t[3]


def node_radius(world: World, tag: int) -> float:
    node = world.node(tag)
    p = world.params
    w = safe_weights(node.aqp, node.energy_rsd, node.energy_init, node.depth, p.region_depth)
    layer = min(node.layer, world.cfg.total_layers)
    return competition_radius(node.energy_rsd, node.energy_init, w, p.ctr, layer,
                              world.cfg.total_layers, world.cfg.radius)


def same_layer_neighbours(world: World, alive: list[int]) -> dict[int, tuple[int, ...]]:
    """Alive same-layer nodes within CTR of each alive node."""
    idx = np.asarray(alive, dtype=int) - 1
    if idx.size == 0:
        return {}
    layers = np.array([world.nodes[i].layer for i in idx])
    close = world.dist[np.ix_(idx, idx)] <= world.cfg.ctr
    close &= layers[:, None] == layers[None, :]
    np.fill_diagonal(close, False)
    return {alive[i]: tuple(alive[j] for j in np.flatnonzero(close[i])) for i in range(len(alive))}


def poll(world: World, primary: int, rad: float, avb: float) -> list[int]:
    """POLLING broadcast; returns alive hearers in the primary's layer."""
    node = world.node(primary)
    log_message(world, Polling(primary, node.layer, avb, rad, node.energy_rsd))
    hearers = world.broadcast_control(primary)
    return [h for h in hearers if world.node(h).layer == node.layer]


def join(world: World, topo: ClusterTopology, member: int, primary: int) -> None:
    """JOIN from ``member`` and the primary's ACK; registers the membership."""
    d = world.d(member, primary)
    log_message(world, Join(member, primary, world.node(member).energy_rsd))
    world.send_control(member, d, (primary,))
    log_message(world, Ack(primary, member))
    world.send_control(primary, d, (member,))
    topo.attach(member, primary)


def designate_subsidiary(primary: int, candidates: dict[int, float]) -> int | None:
    """Highest-AVB candidate (lower tag on ties), or None for an empty cluster."""
    pool = {t: a for t, a in candidates.items() if t != primary}
    if not pool:
        return None
    return min(pool, key=lambda t: (-pool[t], t))


def _assign_subsidiary(world: World, topo: ClusterTopology, primary: int,
                       avb: dict[int, float]) -> None:
    members = topo.cluster(primary)
    pick = designate_subsidiary(primary, {m: avb.get(m, 0.0) for m in members})
    if pick is None:
        topo.subsidiary.pop(primary, None)
        world.log.emit("no_subsidiary", primary=primary)
    else:
        topo.subsidiary[primary] = pick


def demote_replaced_ch(world: World, topo: ClusterTopology, old: int, new: int) -> ClusterTopology:
    """Retire ``old`` after ``new`` displaced it; its members re-join nearby primaries."""
    former = topo.drop_primary(old)
    world.log.emit("role", tag=old, role="demoted", by=new)
    if world.alive(old) and world.d(old, new) <= world.cfg.ctr:
        join(world, topo, old, new)
    else:
        topo.orphans.add(old)
    if former:
        _repoll(world, topo, former)
    return topo


def _repoll(world: World, topo: ClusterTopology, orphans: list[int]) -> list[int]:
    """Attach orphans to the nearest in-range primary; returns those left stranded."""
    stranded = []
    live = sorted(p for p in topo.primaries if world.alive(p))
    polled: set[int] = set()
    for o in sorted(orphans):
        if not world.alive(o):
            topo.orphans.discard(o)
            continue
        best = min((p for p in live if world.d(o, p) <= world.cfg.ctr),
                   key=lambda p: (world.d(o, p), p), default=None)
        if best is None:
            topo.orphans.add(o)
            stranded.append(o)
            continue
        if best not in polled:
            poll(world, best, topo.rad.get(best, world.cfg.ctr), 0.0)
            polled.add(best)
        join(world, topo, o, best)
    return stranded


def run_setup_phase(world: World, previous: ClusterTopology | None = None,
                    scope: set[int] | None = None) -> ClusterTopology:
    """Advertisement, timed CH contention and joining.

    With ``scope`` only those nodes contend and join; the rest of
    ``previous`` is kept (used to retry stalled layers).
    """
    cfg = world.cfg
    prev = previous or ClusterTopology()
    everyone = world.alive_tags()
    ch_prev = {t: int(t in prev.primaries) for t in everyone}
    cov_prev = {t: int(t in prev.members and prev.members[t] in prev.primaries) for t in everyone}
    neigh = same_layer_neighbours(world, everyone)
    if scope is None:
        topo = ClusterTopology()
        alive = everyone
    else:
        topo = copy.deepcopy(prev)
        alive = sorted(t for t in scope if t in ch_prev)
    alive_set = set(alive)
    topo.adjacency = neigh
    avb = {t: node_avb(world, t, len(neigh[t])) for t in everyone}

    for t in alive:
        node = world.node(t)
        log_message(world, Hello(t, node.layer, avb[t], node.energy_rsd))
        world.broadcast_control(t)

    rng = world.rngs["retention"]
    expiry: dict[int, float] = {}
    for t in alive:
        node = world.node(t)
        rnd = float(rng.uniform(0.5, 1.0))
        if node.layer == 1:
            expiry[t] = 0.0
        else:
            expiry[t] = retention_period(node.energy_rsd, node.energy_init, cfg.retention, rnd)
        if world.log.level == "messages":
            world.log.emit("TIMER", tag=t, layer=node.layer, expiry=expiry[t])

    heard: dict[int, list[tuple[float, int]]] = {t: [] for t in everyone}
    scenario: dict[int, Scenario] = {}
    for t in sorted(alive, key=lambda x: (expiry[x], x)):
        node = world.node(t)
        now = expiry[t]
        if any(arr <= now and world.d(t, p) <= topo.rad[p] for arr, p in heard[t]):
            continue
        if node.energy_rsd <= world.params.e_surv:
            continue
        records = tuple(NeighborRecord(k, 1, ch_prev[k], cov_prev[k], avb[k]) for k in neigh[t])
        snap = NeighborhoodSnapshot(t, cfg.node_count, records)
        outcome = elect(ch_prev[t], snap, avb[t], world.params.avb_set)
        if not outcome.becomes_ch:
            continue
        scenario[t] = outcome.fired_scenario
        topo.primaries.add(t)
        topo.rad[t] = node_radius(world, t)
        world.log.emit("role", tag=t, role=Role.PRIMARY.value,
                       scenario=outcome.fired_scenario.name)
        for h in poll(world, t, topo.rad[t], avb[t]):
            arrival = now + world.control_airtime + propagation_delay(world.d(t, h))
            heard[h].append((arrival, t))

    # scenario-3 winners retire the neighbouring CHs they displaced
    for t in sorted(scenario):
        if scenario[t] is not Scenario.S3 or t not in topo.primaries:
            continue
        for k in neigh[t]:
            if ch_prev.get(k) and k in topo.primaries and avb[t] > avb[k] + world.params.avb_set:
                demote_replaced_ch(world, topo, k, t)

    for t in sorted(alive_set - topo.primaries - set(topo.members)):
        options = [p for _, p in heard[t] if p in topo.primaries]
        if not options:
            topo.orphans.add(t)
            continue
        best = min(options, key=lambda p: (world.d(t, p), p))
        join(world, topo, t, best)

    for p in sorted(topo.primaries):
        if p in alive_set or scope is None:
            _assign_subsidiary(world, topo, p, avb)

    populated = {world.node(t).layer for t in alive}
    staffed = {world.node(p).layer for p in topo.primaries}
    for layer in sorted(populated - staffed):
        world.log.emit("ContentionStall", layer=layer)
    apply_roles(world, topo)
    return topo


def detect_ch_failure(ch, join_retransmits: int, params) -> FailureRecord | None:
    if ch.energy_rsd <= params.e_surv:
        return FailureRecord(ch.tag, FailureCause.ENERGY)
    if join_retransmits >= params.srl:
        return FailureRecord(ch.tag, FailureCause.RETRANSMIT)
    return None


def links_upper(world: World, topo: ClusterTopology, tag: int, exclude: int | None = None) -> bool:
    """True if ``tag`` can reach a primary one layer up within CTR (or is in the top tier)."""
    if world.in_upper_tier(tag):
        return True
    layer = world.node(tag).layer
    return any(p != exclude and p != tag and world.alive(p) and world.node(p).layer == layer - 1
               and world.d(tag, p) <= world.cfg.ctr for p in topo.primaries)


def _eligible(world: World, topo: ClusterTopology, tag: int, failed: int) -> bool:
    return (world.alive(tag) and world.node(tag).energy_rsd >= world.params.e_surv
            and links_upper(world, topo, tag, exclude=failed))


def _promote(world: World, topo: ClusterTopology, tag: int, orphans: list[int]) -> None:
    topo.bonding.discard(tag)
    topo.members.pop(tag, None)
    topo.orphans.discard(tag)
    topo.primaries.add(tag)
    topo.rad[tag] = node_radius(world, tag)
    world.log.emit("role", tag=tag, role=Role.PRIMARY.value)
    poll(world, tag, topo.rad[tag], 0.0)
    avb = {}
    leftover = []
    for o in sorted(orphans):
        if o == tag or not world.alive(o):
            continue
        if world.d(o, tag) <= world.cfg.ctr:
            join(world, topo, o, tag)
            avb[o] = node_avb(world, o, len(topo.adjacency.get(o, ())))
        else:
            leftover.append(o)
    _assign_subsidiary(world, topo, tag, avb)
    if leftover:
        _repoll(world, topo, leftover)


def ftbc_one(world: World, topo: ClusterTopology, record: FailureRecord,
             orphans: list[int], subsidiary: int | None) -> tuple[ClusterTopology, FailureRecord]:
    """Wake the idle backup of a failed cluster and promote it if it qualifies."""
    failed = record.failed_tag
    if subsidiary is None or not world.alive(subsidiary):
        world.log.emit("ftbc1_skip", failed=failed, reason="no subsidiary")
        return ftbc_two(world, topo, record, orphans, exclude=())
    # one wake/probe exchange per failure
    waker = next((o for o in orphans if o != subsidiary), subsidiary)
    world.send_control(waker, world.d(waker, subsidiary), (subsidiary,))
    world.send_control(subsidiary, world.d(waker, subsidiary), (waker,))
    record.ftbc1_checked = True
    energy_ok = world.node(subsidiary).energy_rsd >= world.params.e_surv
    link_ok = links_upper(world, topo, subsidiary, exclude=failed)
    world.log.emit("ftbc1_check", failed=failed, candidate=subsidiary,
                   energy_ok=energy_ok, link_ok=link_ok)
    if energy_ok and link_ok:
        _promote(world, topo, subsidiary, [o for o in orphans if o != subsidiary])
        record.path = RecoveryPath.FTBC1
        record.promoted = subsidiary
        record.rounds_to_recover = 0
        return topo, record
    return ftbc_two(world, topo, record, orphans, exclude=(subsidiary,))


def ftbc_two(world: World, topo: ClusterTopology, record: FailureRecord,
             orphans: list[int], exclude=()) -> tuple[ClusterTopology, FailureRecord]:
    """Elect on-demand bonding CHs among survivors until one qualifies or retries run out."""
    failed = record.failed_tag
    pool = [o for o in orphans if world.alive(o) and o not in exclude]
    ranked = []
    for c in pool:
        node = world.node(c)
        nb = [k for k in topo.adjacency.get(c, ()) if world.alive(k)]
        avb_c = node_avb(world, c, len(nb))
        recs = tuple(NeighborRecord(k, 1, int(k in topo.primaries), int(k in topo.members),
                                    node_avb(world, k, len(topo.adjacency.get(k, ()))))
                     for k in nb)
        out = elect(0, NeighborhoodSnapshot(c, world.cfg.node_count, recs), avb_c,
                    world.params.avb_set)
        ranked.append((-out.becomes_ch, -avb_c, c))
    ranked.sort()
    attempts = 1 + world.cfg.max_bonding_retries
    for _, _, c in ranked[:attempts]:
        topo.members.pop(c, None)
        topo.bonding.add(c)
        world.log.emit("role", tag=c, role=Role.BONDING.value, failed=failed)
        world.send_control(c, world.cfg.ctr, ())
        if _eligible(world, topo, c, failed):
            _promote(world, topo, c, [o for o in orphans if o != c])
            record.path = RecoveryPath.FTBC2
            record.promoted = c
            record.rounds_to_recover = 0
            return topo, record
        topo.bonding.discard(c)
    record.path = RecoveryPath.UNRECOVERED
    _repoll(world, topo, [o for o in orphans if world.alive(o)])
    return topo, record


def handle_failures(world: World, topo: ClusterTopology, recover: bool) -> list[FailureRecord]:
    """Detect failed primaries and run the recovery chain (when ``recover``)."""
    records = []
    for p in sorted(topo.primaries):
        node = world.node(p)
        hard_down = not world.alive(p)
        if not hard_down and node.energy_rsd > world.params.e_surv:
            continue
        subsidiary = topo.subsidiary.get(p)
        former = topo.drop_primary(p)
        witnesses = [m for m in former if world.alive(m)]
        if hard_down:
            if not witnesses:
                world.log.emit("failure", failed=p, detected=False, cause=None)
                continue
            # members retransmit JOIN up to the retry limit without an ACK
            for m in witnesses:
                for _ in range(world.params.srl):
                    world.send_control(m, world.d(m, p), ())
            rec = detect_ch_failure(node, world.params.srl, world.params)
        else:
            rec = detect_ch_failure(node, 0, world.params)
            witnesses.append(p)
        world.log.emit("failure", failed=p, detected=True, cause=rec.cause.value)
        for w in witnesses:
            topo.orphans.add(w)
        if recover:
            topo, rec = ftbc_one(world, topo, rec, sorted(witnesses), subsidiary)
        else:
            rec.path = RecoveryPath.UNRECOVERED
        world.log.emit("recovery", failed=p, path=rec.path.value, promoted=rec.promoted)
        records.append(rec)
    apply_roles(world, topo)
    return records


def stalled_layers(world: World, topo: ClusterTopology) -> set[int]:
    populated = {world.node(t).layer for t in world.alive_tags()}
    return populated - {world.node(p).layer for p in topo.primaries}


def retry_stalled(world: World, topo: ClusterTopology, layers: set[int]) -> ClusterTopology:
    """Re-run contention for the unaffiliated nodes of layers left without a CH."""
    scope = {t for t in world.alive_tags()
             if world.node(t).layer in layers and t not in topo.members and t not in topo.primaries}
    if not scope:
        return topo
    return run_setup_phase(world, topo, scope)
