import pytest
from hypothesis import given, strategies as st

from eehtac.baseline import PRESETS, EulcWeights, eulc_round, eulc_score
from eehtac.cli import ledger_csv
from eehtac.config import desk_profile
from eehtac.engine import RecoveryPath
from eehtac.simulation import Simulation


def test_presets_sum_to_one():
    for w in PRESETS.values():
        assert w.alpha + w.beta + w.gamma == pytest.approx(1.0)
    assert len(set(PRESETS.values())) == 4


def test_weights_validation():
    with pytest.raises(ValueError):
        EulcWeights(0.5, 0.5, 0.5)
    with pytest.raises(ValueError):
        EulcWeights(-0.1, 0.6, 0.5)


def test_score_examples():
    assert eulc_score(1.0, 1.0, 0.0, PRESETS["eulc1"]) == pytest.approx(1.0)
    assert eulc_score(0.5, 0.5, 0.5, EulcWeights(1 / 3, 1 / 3, 1 / 3)) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        eulc_score(1.2, 0.5, 0.5, PRESETS["eulc1"])


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 100),
       st.sampled_from(sorted(PRESETS)))
def test_score_invariant_under_weight_scaling(e, dens, dist, k, name):
    w = PRESETS[name]
    assert eulc_score(e, dens, dist, w.scaled(k)) == pytest.approx(eulc_score(e, dens, dist, w))


def baseline_run(protocol, node_count=60, **kw):
    cfg = desk_profile(node_count=node_count, rounds=60, protocol=protocol, seed=9, **kw)
    sim = Simulation(cfg)
    sim.run()
    return sim


def test_baseline_never_recovers():
    sim = baseline_run("eulc2", fault_ch_fraction=0.2)
    assert sim.failures
    assert all(r.path is RecoveryPath.UNRECOVERED for r in sim.failures)
    assert sim.rows[-1].cfr == 0.0


def test_variants_differ():
    ledgers = {ledger_csv(baseline_run(p, node_count=100).rows) for p in PRESETS}
    assert len(ledgers) == 4


def test_baseline_is_deterministic():
    assert ledger_csv(baseline_run("eulc3").rows) == ledger_csv(baseline_run("eulc3").rows)


def test_eulc_round_steps():
    sim = Simulation(desk_profile(node_count=30, rounds=5, protocol="eulc1"))
    sim.start()
    topo, row = eulc_round(sim)
    assert row.round == 1 and topo is sim.topology
    with pytest.raises(ValueError):
        eulc_round(Simulation(desk_profile(node_count=30, rounds=5)))
