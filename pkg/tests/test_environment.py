import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eehtac.auv import AuvState, Bundle, auv_round, nearest_neighbour_tour, visit_time
from eehtac.clustering import layer_number
from eehtac.config import ScenarioConfig, desk_profile
from eehtac.environment import EventLog, advance_mobility, build_world, deploy, substreams, walk_aqp


def test_deploy_is_seeded():
    cfg = desk_profile(seed=11)
    a = deploy(cfg, substreams(11)["deploy"])[1]
    b = deploy(cfg, substreams(11)["deploy"])[1]
    c = deploy(cfg, substreams(12)["deploy"])[1]
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_deploy_tags_and_layers():
    cfg = desk_profile(seed=4)
    nodes, pos = deploy(cfg, substreams(4)["deploy"])
    assert [n.tag for n in nodes] == list(range(1, cfg.node_count + 1))
    assert (pos >= 0).all() and (pos <= np.asarray(cfg.region)).all()
    for n, p in zip(nodes, pos):
        assert n.layer == layer_number(p[2], cfg.ctr, cfg.k_layer)


def test_substreams_are_independent():
    s = substreams(7)
    assert len({float(g.random()) for g in s.values()}) == len(s)


def test_still_water_keeps_nodes_in_place():
    pos = np.array([[10.0, 20.0, 30.0], [50.0, 50.0, 50.0]])
    moved, speed = advance_mobility(pos, 4.5, 0.3, 0.0, 0.0, (100, 100, 100),
                                    np.random.default_rng(0))
    assert np.array_equal(moved, pos)
    assert np.all(speed == 0.0)


def test_current_displacement():
    pos = np.array([[10.0, 20.0, 30.0]])
    moved, speed = advance_mobility(pos, 10.0, 0.0, 0.3, 0.0, (100, 100, 100),
                                    np.random.default_rng(0))
    assert moved[0] == pytest.approx([13.0, 20.0, 30.0])
    assert speed[0] == pytest.approx(0.3)


def test_mobility_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        advance_mobility(np.zeros((1, 3)), 0.0, 0.0, 0.1, 0.0, (1, 1, 1), np.random.default_rng(0))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 2.0), st.floats(0, 1.0), st.floats(0, 6.3))
def test_mobility_stays_in_region(seed, current, jitter, heading):
    rng = np.random.default_rng(seed)
    region = (50.0, 80.0, 30.0)
    pos = rng.uniform(0, 1, (20, 3)) * np.array(region)
    moved, _ = advance_mobility(pos, 4.5, heading, current, jitter, region, rng)
    assert (moved >= 0).all() and (moved <= np.array(region) + 1e-9).all()


def test_aqp_walk_stays_admissible():
    world = build_world(desk_profile(node_count=30), EventLog())
    rng = np.random.default_rng(1)
    for _ in range(200):
        walk_aqp(world.nodes, rng)
    assert all(0 <= n.aqp.turbidity <= 5 and 6.5 <= n.aqp.ph <= 9.5 for n in world.nodes)


def test_build_world_defaults():
    cfg = ScenarioConfig(node_count=12, seed=2)
    w = build_world(cfg)
    assert len(w.alive_tags()) == 12
    assert w.dist.shape == (12, 12)
    assert w.d(1, 1) == 0.0


# AUV

def run_tour(stops, start=(0.0, 0.0, 0.0), speed=2.0, budget=1e6):
    state = AuvState(np.asarray(start, dtype=float), speed)
    buffers = {t: Bundle(3, 0.0, 1) for t in stops}
    delivered = []
    visits = auv_round(state, buffers,
                       locate=lambda t: stops.get(t),
                       offload_target=lambda: (0.0, 0.0, 0.0),
                       collect=lambda t, b: b,
                       deliver=delivered.append,
                       time_budget=budget)
    return state, visits, delivered


def test_auv_arrival_time():
    _, visits, delivered = run_tour({1: (120.0, 0.0, 0.0)})
    assert visits[0].arrival == pytest.approx(60.0)
    assert delivered[0].readings == 3


def test_auv_greedy_order():
    stops = {1: np.array([10.0, 0, 0]), 2: np.array([100.0, 0, 0]), 3: np.array([30.0, 0, 0])}
    assert nearest_neighbour_tour((0, 0, 0), stops) == [1, 3, 2]
    _, visits, _ = run_tour(stops)
    assert [v.tag for v in visits] == [1, 3, 2]


def test_auv_no_stops():
    state, visits, delivered = run_tour({})
    assert visits == [] and delivered == []
    assert state.idle


def test_auv_budget_carries_over():
    state, visits, _ = run_tour({1: (120.0, 0.0, 0.0)}, budget=30.0)
    assert visits == []
    assert state.position == pytest.approx([60.0, 0.0, 0.0])
    assert state.tour == [1, 0]


def test_visit_time():
    assert visit_time(120.0, 2.0) == 60.0
    with pytest.raises(ValueError):
        visit_time(1.0, 0.0)
