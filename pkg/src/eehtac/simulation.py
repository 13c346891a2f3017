"""Master round loop: mobility, clustering, faults, recovery, data, AUV and the ledger."""

from __future__ import annotations

import math
from collections import deque
from typing import IO

import numpy as np

from .auv import LINK_RANGE, AuvState, Bundle, auv_round
from .baseline import PRESETS, eulc_setup_phase
from .config import ScenarioConfig
from .engine import (ClusterTopology, apply_roles, handle_failures, retry_stalled,
                     run_setup_phase, stalled_layers)
from .environment import EventLog, World, advance_mobility, build_world, walk_aqp
from .metrics import LedgerRow, LedgerTotals, round_ledger


def fault_schedule(total_kills: int, first: int, rounds: int) -> dict[int, int]:
    """Spread ``total_kills`` evenly over rounds first..rounds; returns round -> kills."""
    plan: dict[int, int] = {}
    if total_kills <= 0 or rounds < first:
        return plan
    span = rounds - first + 1
    for i in range(total_kills):
        r = first + (i * span) // total_kills
        plan[r] = plan.get(r, 0) + 1
    return plan


class Simulation:
    """One seeded run. ``start()`` produces round 0, each ``step()`` one more round."""

    def __init__(self, cfg: ScenarioConfig, log_sink: IO[str] | None = None):
        self.cfg = cfg
        self.log = EventLog(cfg.log_level, log_sink)
        self.world: World = build_world(cfg, self.log)
        self.topology = ClusterTopology()
        self.totals = LedgerTotals()
        self.buffers: dict[int, Bundle] = {}
        self.auv = AuvState(np.asarray(cfg.auv_start_position, dtype=float), cfg.auv_speed)
        self.anchor_prev: dict[int, tuple[int, np.ndarray]] = {}
        self.drifts: deque[list[float]] = deque(maxlen=cfg.history_k)
        self.kills: dict[int, int] = {}
        self.rows: list[LedgerRow] = []
        self.round = -1
        self.stalled: set[int] = set()
        self.failures = []
        self._delivered = 0
        self._delay = 0.0

    @property
    def baseline(self) -> bool:
        return self.cfg.protocol in PRESETS

    # phases
    def _setup(self) -> None:
        w = self.world
        for node in w.nodes:
            if w.alive(node.tag):
                node.push_history(int(node.tag in self.topology.primaries), self.cfg.history_k)
        if self.baseline:
            self.topology = eulc_setup_phase(w, PRESETS[self.cfg.protocol])
        else:
            self.topology = run_setup_phase(w, self.topology)
        self.stalled = stalled_layers(w, self.topology)

    def _inject_faults(self) -> None:
        w = self.world
        rng = w.rngs["faults"]
        for _ in range(self.kills.get(self.round, 0)):
            live = sorted(p for p in self.topology.primaries if w.alive(p))
            if not live:
                self.log.emit("fault_skipped", reason="no live primary")
                continue
            victim = int(live[rng.integers(len(live))])
            w.failed[victim - 1] = True
            self.log.emit("fault_injected", tag=victim)

    def _to_sink(self, holder: int, bundle: Bundle) -> None:
        """Forward a fused bundle from an upper-tier holder to the sink, CH to CH."""
        w = self.world
        bits = w.packet_bits
        sink = self.cfg.sink_position
        relays = [p for p in sorted(self.topology.primaries) if w.alive(p) and w.in_upper_tier(p)]
        here = holder
        while True:
            gap = w.d_point(here, sink)
            nxt = None
            if gap > self.cfg.ctr:
                closer = [p for p in relays
                          if p != here and w.d(here, p) <= self.cfg.ctr and w.d_point(p, sink) < gap]
                if closer:
                    nxt = min(closer, key=lambda p: (w.d_point(p, sink), p))
            if nxt is None:
                w.charge(here, w.energy.tx_energy(bits, gap))
                bundle.delay += bundle.readings * w.hop_delay(bits, gap)
                break
            d = w.d(here, nxt)
            w.charge(here, w.energy.tx_energy(bits, d))
            w.charge(nxt, w.energy.rx_energy(bits) + w.energy.fuse_energy(bits))
            bundle.delay += bundle.readings * w.hop_delay(bits, d)
            here = nxt
        self._delivered += bundle.readings
        self._delay += bundle.delay

    def _data_phase(self) -> None:
        w = self.world
        topo = self.topology
        bits = w.packet_bits
        inbox: dict[int, Bundle] = {p: Bundle() for p in topo.primaries if w.alive(p)}
        for t in w.alive_tags():
            if t in inbox:
                inbox[t].add(Bundle(1, 0.0, 0))
                continue
            p = topo.members.get(t)
            if p is None or p not in inbox:
                continue  # unaffiliated: reading lost
            d = w.d(t, p)
            w.charge(t, w.energy.tx_energy(bits, d))
            w.charge(p, w.energy.rx_energy(bits))
            inbox[p].add(Bundle(1, w.hop_delay(bits, d), 0))
        for p, b in inbox.items():
            w.charge(p, w.energy.fuse_energy(bits * b.readings))
            b.packets = 1

        order = sorted(inbox, key=lambda p: (-w.node(p).layer, p))
        for p in order:
            b = inbox[p]
            if b.readings == 0:
                continue
            if w.in_upper_tier(p):
                self._to_sink(p, b)
            elif not self.baseline:
                self.buffers.setdefault(p, Bundle()).add(b)
            else:
                layer = w.node(p).layer
                ups = [q for q in inbox if w.node(q).layer == layer - 1
                       and w.d(p, q) <= self.cfg.ctr]
                if not ups:
                    self.log.emit("route_void", tag=p, readings=b.readings)
                    continue
                q = min(ups, key=lambda q: (w.d(p, q), q))
                d = w.d(p, q)
                w.charge(p, w.energy.tx_energy(bits, d))
                w.charge(q, w.energy.rx_energy(bits) + w.energy.fuse_energy(bits))
                b.delay += b.readings * w.hop_delay(bits, d)
                inbox[q].add(b)

    def _auv_phase(self) -> None:
        w = self.world
        bits = w.packet_bits
        for t in [t for t in self.buffers if not w.alive(t)]:
            lost = self.buffers.pop(t)
            self.log.emit("buffer_lost", tag=t, readings=lost.readings)

        def locate(tag):
            return w.pos[tag - 1] if w.alive(tag) else None

        def relay():
            ups = [p for p in self.topology.primaries if w.alive(p) and w.in_upper_tier(p)]
            if not ups:
                return None
            return min(ups, key=lambda p: (float(np.linalg.norm(w.pos[p - 1] - self.auv.position)), p))

        def offload_target():
            r = relay()
            return self.cfg.sink_position if r is None else w.pos[r - 1]

        def collect(tag, bundle):
            w.charge(tag, w.energy.tx_energy(bits, LINK_RANGE) * max(1, bundle.packets))
            bundle.delay += bundle.readings * w.hop_delay(bits, LINK_RANGE)
            return bundle

        def deliver(cargo):
            if cargo.readings == 0:
                return
            r = relay()
            if r is None or float(np.linalg.norm(w.pos[r - 1] - self.auv.position)) > LINK_RANGE:
                cargo.delay += cargo.readings * w.hop_delay(bits, 0.0)
                self._delivered += cargo.readings
                self._delay += cargo.delay
                return
            w.charge(r, w.energy.rx_energy(bits) + w.energy.fuse_energy(bits))
            cargo.delay += cargo.readings * w.hop_delay(bits, LINK_RANGE)
            self._to_sink(r, cargo)

        visits = auv_round(self.auv, self.buffers, locate, offload_target, collect, deliver,
                           self.cfg.round_period)
        for v in visits:
            self.log.emit("auv_visit", tag=v.tag, arrival=v.arrival, readings=v.readings)

    def _drift(self) -> list[float]:
        w = self.world
        topo = self.topology
        out = []
        now: dict[int, tuple[int, np.ndarray]] = {}
        for t in w.alive_tags():
            if t in topo.primaries:
                a = t
            elif t in topo.members and w.alive(topo.members[t]):
                a = topo.members[t]
            else:
                continue
            rel = w.pos[t - 1] - w.pos[a - 1]
            now[t] = (a, rel)
            old = self.anchor_prev.get(t)
            if old is None or (old[0] == t and a == t):
                continue
            out.append(float(np.linalg.norm(rel - old[1])))
        self.anchor_prev = now
        return out

    def _ledger(self) -> LedgerRow:
        w = self.world
        self.log.emit("round_summary", energy=w.round_energy, delivered=self._delivered,
                      delay=self._delay, control_time=w.round_control * self.cfg.proc_delay)
        events = [r for r in self.log.records[self._mark:]
                  if r["kind"] in ("round_summary", "failure", "recovery")]
        alive = [n for n in w.nodes if w.alive(n.tag)]
        row = round_ledger(
            self.round, events, self.totals,
            [n.ch_history for n in alive],
            [int(n.tag in self.topology.primaries) for n in alive],
            self.cfg.retention,
            [d for rnd in self.drifts for d in rnd],
            (self.round + 1) * self.cfg.round_period,
        )
        self.log.compact()
        self.rows.append(row)
        return row

    def _begin_round(self) -> None:
        w = self.world
        self.round += 1
        w.round = self.round
        self.log.round = self.round
        w.time = self.round * self.cfg.round_period
        w.round_energy = 0.0
        w.round_control = 0
        self._delivered = 0
        self._delay = 0.0
        self._mark = len(self.log.records)

    # public driver
    def start(self) -> LedgerRow:
        if self.round >= 0:
            raise RuntimeError("simulation already started")
        self._begin_round()
        self._setup()
        frac = self.cfg.fault_ch_fraction
        if frac > 0 and self.topology.primaries:
            total = max(1, round(frac * len(self.topology.primaries)))
            self.kills = fault_schedule(total, max(1, self.cfg.fault_first_round), self.cfg.rounds)
        self._drift()
        self.drifts.append([])
        return self._ledger()

    def step(self) -> LedgerRow:
        if self.round < 0:
            return self.start()
        self._begin_round()
        w = self.world
        cfg = self.cfg
        heading = w.current_heading + cfg.current_turn * w.time
        w.pos, speed = advance_mobility(w.pos, cfg.round_period, heading, cfg.current_speed,
                                        cfg.jitter, cfg.region, w.rngs["mobility"])
        for node, s in zip(w.nodes, speed):
            node.mobility_speed = float(s)
        w.refresh_geometry()
        walk_aqp(w.nodes, w.rngs["aqp"])
        for t in w.alive_tags():
            w.charge(t, w.energy.e_idle)

        if self.round % cfg.epoch_rounds == 0:
            self._setup()
        elif self.stalled:
            self.topology = retry_stalled(w, self.topology, self.stalled)
            self.stalled = stalled_layers(w, self.topology)
        self._inject_faults()
        self.failures += handle_failures(w, self.topology, recover=not self.baseline)
        self._data_phase()
        if not self.baseline:
            self._auv_phase()
        apply_roles(w, self.topology)
        self.drifts.append(self._drift())
        return self._ledger()

    def run(self) -> list[LedgerRow]:
        if self.cfg.rounds == 0:
            return []
        self.start()
        for _ in range(self.cfg.rounds):
            self.step()
        return self.rows

    def energy_spent(self) -> float:
        return sum(n.energy_init - n.energy_rsd for n in self.world.nodes)


def run(cfg: ScenarioConfig, log_sink: IO[str] | None = None) -> tuple[list[LedgerRow], list[dict]]:
    """Run a full scenario; returns the ledger rows and the retained event records."""
    sim = Simulation(cfg, log_sink)
    rows = sim.run()
    return rows, sim.log.records


def format_value(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if not math.isfinite(v):
        return repr(float(v))
    return repr(round(float(v), 12))
