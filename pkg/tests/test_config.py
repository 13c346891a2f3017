import pytest
from hypothesis import given, settings, strategies as st

from eehtac.config import (ConfigError, ScenarioConfig, desk_profile, parse_config,
                           render_config)


def test_empty_document_gives_defaults():
    cfg = parse_config("")
    assert cfg == ScenarioConfig()
    assert cfg.node_count == 500
    assert cfg.region == (500.0, 500.0, 500.0)
    assert (cfg.packet_bytes, cfg.data_rate, cfg.e_init) == (500, 4000.0, 2.0)
    assert (cfg.e_idle, cfg.e_fuse, cfg.auv_speed) == (1e-7, 5e-9, 2.0)
    assert (cfg.carrier_khz, cfg.ctr) == (27.0, 60.0)
    assert cfg.sink_position == (250.0, 250.0, 0.0)


def test_negative_rounds_rejected_with_line():
    with pytest.raises(ConfigError) as exc:
        parse_config("run:\n  seed: 3\n  rounds: -1\n")
    assert exc.value.line == 3


def test_retention_preset():
    assert parse_config("protocol:\n  retention_s: high-fault\n").retention == 0.1
    assert parse_config("protocol:\n  retention_s: high-overhead\n").retention == 300.0
    with pytest.raises(ConfigError) as exc:
        parse_config("protocol:\n  retention_s: sometimes\n")
    assert exc.value.line == 2


@pytest.mark.parametrize("doc,line", [
    ("network:\n  nodes: 5\n", 2),
    ("bogus:\n  a: 1\n", 1),
    ("run:\n  rounds: 5\n  rounds: 6\n", 3),
    ("network:\n  node_count: 1.5\n", 2),
    ("network:\n  region_m: [1, 2]\n", 2),
    ("protocol:\n  name: leach\n", 2),
    ("- a\n- b\n", 1),
])
def test_schema_errors(doc, line):
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    assert exc.value.line == line


def test_malformed_yaml():
    with pytest.raises(ConfigError) as exc:
        parse_config("run: [1, 2\n")
    assert exc.value.line is not None


def test_round_trip_defaults_and_desk():
    for cfg in (ScenarioConfig(), desk_profile(seed=7, retention=0.1, protocol="eulc3")):
        assert parse_config(render_config(cfg)) == cfg


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 1000), st.sampled_from([0.1, 90.0, 300.0, 12.5]),
       st.sampled_from(["eehtac", "eulc1", "eulc4"]), st.integers(0, 5000),
       st.floats(0, 1), st.integers(1, 5))
def test_round_trip_property(n, ret, proto, rounds, frac, k):
    cfg = ScenarioConfig(node_count=n, retention=ret, protocol=proto, rounds=rounds,
                         fault_ch_fraction=frac, k_layer=k)
    assert parse_config(render_config(cfg)) == cfg


def test_derived_values():
    cfg = ScenarioConfig()
    assert cfg.survival_threshold == pytest.approx(0.1)
    assert cfg.total_layers == 10
    assert ScenarioConfig(retention=0.1).epoch_rounds == 1
    assert ScenarioConfig(retention=90).epoch_rounds == 20
    assert ScenarioConfig(retention=300).epoch_rounds == 67
    assert desk_profile().region == (292.0, 292.0, 292.0)
