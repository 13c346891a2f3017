import numpy as np
import pytest

from eehtac.clustering import AqpReading, NodeState, layer_number
from eehtac.config import ScenarioConfig
from eehtac.environment import EventLog, World, substreams


def make_world(points, energies=None, aqp=None, level="messages", seed=3, **overrides):
    """Hand-placed world; tag i + 1 sits at ``points[i]``."""
    cfg = ScenarioConfig(node_count=len(points), region=(200.0, 200.0, 200.0), seed=seed,
                         log_level=level, **overrides)
    pos = np.asarray(points, dtype=float)
    nodes = []
    for i, p in enumerate(pos):
        e = cfg.e_init if energies is None else energies[i]
        q = AqpReading(1.0, 7.0) if aqp is None else aqp[i]
        nodes.append(NodeState(i + 1, tuple(p), cfg.e_init, e, q,
                               layer=layer_number(float(p[2]), cfg.ctr, cfg.k_layer)))
    return World(cfg, nodes, pos, substreams(seed), EventLog(level))


@pytest.fixture
def world_factory():
    return make_world
