from collections import Counter

import numpy as np
from hypothesis import given, settings, strategies as st

from conftest import make_world
from eehtac import simulation
from eehtac.clustering import AqpReading, NetworkParams, NodeState, Role
from eehtac.config import desk_profile
from eehtac.engine import (ClusterTopology, FailureCause, FailureRecord, RecoveryPath,
                           demote_replaced_ch, designate_subsidiary, detect_ch_failure,
                           ftbc_two, handle_failures, run_setup_phase)
from eehtac.simulation import Simulation


def kinds(world, kind):
    return [r for r in world.log.records if r["kind"] == kind]


# setup phase

def test_single_node_becomes_primary():
    w = make_world([(50, 50, 100)])
    topo = run_setup_phase(w)
    assert topo.primaries == {1}
    assert w.node(1).role is Role.PRIMARY
    assert kinds(w, "role")[0]["scenario"] == "S1"


def test_shorter_timer_wins_and_other_joins():
    # tag 1 is drained, so its contention timer expires first
    w = make_world([(50, 50, 100), (53, 50, 100)], energies=[0.4, 2.0],
                   aqp=[AqpReading(1500, 7), AqpReading(1, 7)])
    topo = run_setup_phase(w)
    timers = {r["tag"]: r["expiry"] for r in kinds(w, "TIMER")}
    assert timers[1] < timers[2]
    assert topo.primaries == {1}
    assert topo.members == {2: 1}
    assert topo.subsidiary == {1: 2}
    assert [r["kind"] for r in w.log.records[-3:]] == ["POLLING", "JOIN", "ACK"]


def test_surface_layer_skips_timer():
    w = make_world([(50, 50, 0), (80, 50, 0), (50, 50, 100)], energies=[0.3, 2.0, 2.0])
    run_setup_phase(w)
    timers = {r["tag"]: (r["layer"], r["expiry"]) for r in kinds(w, "TIMER")}
    assert timers[1] == (1, 0.0) and timers[2] == (1, 0.0)
    assert timers[3][1] > 0


def test_low_energy_layer_stalls():
    w = make_world([(50, 50, 100)], energies=[0.05], e_surv=0.1)
    topo = run_setup_phase(w)
    assert topo.primaries == set()
    assert topo.orphans == {1}
    assert kinds(w, "ContentionStall") == [{"round": 0, "kind": "ContentionStall", "layer": 3}]


def random_points(seed, n):
    rng = np.random.default_rng(seed)
    return rng.uniform(0, 1, (n, 3)) * np.array([150.0, 150.0, 200.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 30))
def test_setup_partitions_nodes(seed, n):
    w = make_world(random_points(seed, n), level="events", seed=seed)
    topo = run_setup_phase(w)
    alive = w.alive_tags()
    topo.check_partition(alive)
    for t in alive:
        placed = (t in topo.primaries) + (t in topo.members) + (t in topo.orphans)
        assert placed == 1
    for m, p in topo.members.items():
        assert w.node(m).layer == w.node(p).layer
        assert w.d(m, p) <= w.cfg.ctr
    for p, s in topo.subsidiary.items():
        assert topo.members[s] == p


# subsidiary designation and failure detection

def test_designate_subsidiary():
    assert designate_subsidiary(9, {1: 0.2, 2: 0.5, 3: 0.4}) == 2
    assert designate_subsidiary(9, {4: 0.5, 2: 0.5}) == 2
    assert designate_subsidiary(9, {}) is None
    assert designate_subsidiary(9, {9: 0.8}) is None


def ch_node(energy):
    return NodeState(1, (0.0, 0.0, 100.0), 2.0, energy, AqpReading(1, 7))


def test_detect_failure_examples():
    params = NetworkParams(node_count=10, region=(100, 100, 100), total_layers=3, e_surv=0.1, srl=3)
    assert detect_ch_failure(ch_node(0.05), 0, params).cause is FailureCause.ENERGY
    assert detect_ch_failure(ch_node(1.0), 3, params).cause is FailureCause.RETRANSMIT
    assert detect_ch_failure(ch_node(1.0), 2, params) is None
    assert detect_ch_failure(ch_node(1.0), 0, params) is None


# recovery

def cluster_world(sub_pos=(100, 105, 100), with_upper=True, extra=(), energies=None):
    """Primary 1 in layer 3 with members 2..6 (2 is the subsidiary), upper primary 7."""
    pts = [(100, 100, 100), sub_pos, (104, 100, 100), (96, 100, 100), (100, 96, 100),
           (103, 103, 100), (100, 100, 50) if with_upper else (190, 190, 10), *extra]
    w = make_world(pts, energies=energies, e_surv=0.1)
    topo = ClusterTopology(primaries={1, 7} if with_upper else {1},
                           members={m: 1 for m in range(2, 7)}, subsidiary={1: 2},
                           rad={1: 6.0, 7: 6.0})
    return w, topo


def test_ftbc_one_promotes_subsidiary():
    w, topo = cluster_world()
    w.failed[0] = True
    recs = handle_failures(w, topo, recover=True)
    assert len(recs) == 1
    r = recs[0]
    assert (r.cause, r.path, r.promoted) == (FailureCause.RETRANSMIT, RecoveryPath.FTBC1, 2)
    assert topo.cluster(2) == [3, 4, 5, 6]
    assert w.node(2).role is Role.PRIMARY
    check = kinds(w, "ftbc1_check")[0]
    assert check["energy_ok"] and check["link_ok"]


def test_ftbc_one_out_of_coverage_falls_through():
    w, topo = cluster_world(sub_pos=(100, 145, 130))
    w.failed[0] = True
    r = handle_failures(w, topo, recover=True)[0]
    check = kinds(w, "ftbc1_check")[0]
    assert not check["link_ok"]
    assert r.path is RecoveryPath.FTBC2
    assert r.promoted != 2 and r.promoted in topo.primaries


def test_ftbc_two_unrecovered_repolls_neighbour():
    w, topo = cluster_world(with_upper=False, extra=[(130, 100, 100)])
    topo.primaries.add(8)
    topo.rad[8] = 6.0
    w.failed[0] = True
    r = handle_failures(w, topo, recover=True)[0]
    assert r.path is RecoveryPath.UNRECOVERED
    assert topo.cluster(8) == [2, 3, 4, 5, 6]
    bonded = [e["tag"] for e in kinds(w, "role") if e["role"] == Role.BONDING.value]
    assert len(bonded) == 1 + w.cfg.max_bonding_retries


def test_ftbc_two_single_member():
    w = make_world([(100, 100, 100), (104, 100, 100), (100, 100, 50)], e_surv=0.1)
    topo = ClusterTopology(primaries={1, 3}, members={2: 1}, rad={1: 6.0, 3: 6.0})
    w.failed[0] = True
    r = handle_failures(w, topo, recover=True)[0]
    assert (r.path, r.promoted) == (RecoveryPath.FTBC2, 2)
    roles = [e["role"] for e in kinds(w, "role") if e["tag"] == 2]
    assert roles == [Role.BONDING.value, Role.PRIMARY.value]


def test_ftbc_two_direct_first_eligible():
    w, topo = cluster_world()
    topo.drop_primary(1)
    rec = FailureRecord(1, FailureCause.RETRANSMIT)
    topo, rec = ftbc_two(w, topo, rec, [2, 3, 4, 5, 6])
    assert rec.path is RecoveryPath.FTBC2
    assert len(topo.cluster(rec.promoted)) == 4


def test_energy_failure_without_kill():
    w, topo = cluster_world(energies=[0.05] + [2.0] * 6)
    r = handle_failures(w, topo, recover=True)[0]
    assert r.cause is FailureCause.ENERGY
    assert r.path is RecoveryPath.FTBC1
    assert 1 in topo.members  # the drained primary stays on as a member


def test_recovery_never_adds_clusters():
    for kwargs in ({}, {"sub_pos": (100, 145, 130)}, {"with_upper": False}):
        w, topo = cluster_world(**kwargs)
        before = Counter(w.node(p).layer for p in topo.primaries)
        w.failed[0] = True
        handle_failures(w, topo, recover=True)
        after = Counter(w.node(p).layer for p in topo.primaries)
        assert all(after[k] <= before[k] for k in after)


def test_unrecovered_without_recovery():
    w, topo = cluster_world()
    w.failed[0] = True
    r = handle_failures(w, topo, recover=False)[0]
    assert r.path is RecoveryPath.UNRECOVERED
    assert kinds(w, "ftbc1_check") == []


def test_silent_death_is_undetected():
    w = make_world([(100, 100, 100)])
    topo = ClusterTopology(primaries={1})
    w.failed[0] = True
    assert handle_failures(w, topo, recover=True) == []
    assert kinds(w, "failure")[0]["detected"] is False


# replaced-CH demotion

def demotion_world(old_pos):
    pts = [old_pos, (100, 100, 100), (103, 100, 100), (100, 103, 100), (97, 100, 100)]
    w = make_world(pts)
    topo = ClusterTopology(primaries={1, 2}, members={3: 1, 4: 1, 5: 1}, rad={1: 6.0, 2: 6.0})
    return w, topo


def test_demotion_in_range_becomes_member():
    w, topo = demotion_world((110, 100, 100))
    demote_replaced_ch(w, topo, 1, 2)
    assert topo.primaries == {2}
    assert topo.role_of(1) is Role.CM
    assert topo.cluster(2) == [1, 3, 4, 5]


def test_demotion_out_of_range_becomes_ordinary():
    w, topo = demotion_world((100, 170, 100))
    demote_replaced_ch(w, topo, 1, 2)
    assert topo.role_of(1) is Role.ORDINARY
    assert topo.cluster(2) == [3, 4, 5]


# whole-run transcript checks

def transcript(**overrides):
    cfg = desk_profile(node_count=40, rounds=30, log_level="messages", seed=5, **overrides)
    sim = Simulation(cfg)
    sim.run()
    return sim


def test_message_causality():
    sim = transcript(fault_ch_fraction=0.2)
    polled: set[tuple[int, int]] = set()
    joined: set[tuple[int, int, int]] = set()
    joins = 0
    for r in sim.log.records:
        rnd = r["round"]
        if r["kind"] == "POLLING":
            polled.add((rnd, r["tag"]))
        elif r["kind"] == "JOIN":
            joins += 1
            assert (rnd, r["target_primary_tag"]) in polled
            joined.add((rnd, r["sender_tag"], r["target_primary_tag"]))
        elif r["kind"] == "ACK":
            assert (rnd, r["to_tag"], r["from_tag"]) in joined
    assert joins > 0


def test_fault_injection_bookkeeping():
    sim = transcript(fault_ch_fraction=0.3)
    recs = sim.log.records
    injected = [(r["round"], r["tag"]) for r in recs if r["kind"] == "fault_injected"]
    assert injected
    failures = {(r["round"], r["failed"]): r for r in recs if r["kind"] == "failure"}
    recovered = {(r["round"], r["failed"]) for r in recs if r["kind"] == "recovery"}
    assert all(key in failures for key in injected)
    assert {k for k, f in failures.items() if f["detected"]} == recovered
    detected = sum(f["detected"] for f in failures.values())
    assert sim.rows[-1].cfd == 100.0 * detected / len(failures)


def test_roles_partition_every_round(monkeypatch):
    seen = []
    real = simulation.apply_roles

    def checked(world, topo):
        topo.check_partition(world.alive_tags())
        seen.append(world.round)
        real(world, topo)

    monkeypatch.setattr(simulation, "apply_roles", checked)
    transcript(fault_ch_fraction=0.3)
    assert len(seen) == 30
