"""Scenario configuration: defaults, YAML parsing with line-precise errors, rendering."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any

import yaml

from .acoustics import EnergyModel
from .clustering import NetworkParams, P4Variant, PriorityMode, RadiusMode, total_layers

RETENTION_PRESETS = {
    "high-fault": 0.1,
    "normal": 90.0,
    "high-overhead": 300.0,
}
PROTOCOLS = ("eehtac", "eulc1", "eulc2", "eulc3", "eulc4")
LOG_LEVELS = ("events", "messages")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class ScenarioConfig:
    # network
    node_count: int = 500
    region: tuple[float, float, float] = (500.0, 500.0, 500.0)
    sink: tuple[float, float, float] | None = None  # None: surface centre
    ctr: float = 60.0
    k_layer: int = 1
    # radio
    packet_bytes: int = 500
    control_bytes: int = 32
    data_rate: float = 4000.0
    carrier_khz: float = 27.0
    spreading: float = 1.5
    # energy
    e_init: float = 2.0
    e_idle: float = 1e-7
    e_fuse: float = 5e-9
    e_elec: float = 50e-9
    amp: float = 3.909e-10
    # protocol
    protocol: str = "eehtac"
    retention: float = 90.0  # t_cmp, seconds
    t_adv: float = 1.0
    avb_set: float = 0.05
    e_surv: float | None = None  # None: 5% of e_init
    srl: int = 3
    priority_mode: str = "low"
    p4_variant: str = "literal"
    radius_mode: str = "clamped"
    history_k: int = 8
    max_bonding_retries: int = 3
    proc_delay: float = 0.005
    upper_tier_layers: int = 1
    # mobility
    current_speed: float = 0.1
    current_turn: float = 0.002  # rad/s drift of the current heading
    jitter: float = 0.05  # m/s, isotropic
    # auv
    auv_speed: float = 2.0
    auv_start: tuple[float, float, float] | None = None  # None: centre bottom
    # faults
    fault_ch_fraction: float = 0.0
    fault_first_round: int = 1
    # run
    rounds: int = 800
    round_period: float = 4.5
    seed: int = 1
    log_level: str = "events"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        positive = ("node_count", "ctr", "packet_bytes", "control_bytes", "data_rate",
                    "carrier_khz", "spreading", "e_init", "e_idle", "e_fuse", "e_elec", "amp",
                    "retention", "t_adv", "srl", "history_k", "auv_speed", "round_period")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        non_negative = ("avb_set", "max_bonding_retries", "proc_delay", "current_speed",
                        "current_turn", "jitter", "fault_ch_fraction", "rounds", "seed")
        for name in non_negative:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if len(self.region) != 3 or min(self.region) <= 0:
            raise ConfigError("region must be three positive extents")
        if not 1 <= self.k_layer <= 5:
            raise ConfigError("k_layer must lie in [1, 5]")
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}")
        if self.priority_mode not in ("low", "high"):
            raise ConfigError("priority_mode must be 'low' or 'high'")
        if self.p4_variant not in ("literal", "complementary"):
            raise ConfigError("p4_variant must be 'literal' or 'complementary'")
        if self.radius_mode not in ("literal", "clamped"):
            raise ConfigError("radius_mode must be 'literal' or 'clamped'")
        if self.log_level not in LOG_LEVELS:
            raise ConfigError(f"log_level must be one of {LOG_LEVELS}")
        if self.fault_ch_fraction > 1:
            raise ConfigError("fault_ch_fraction must not exceed 1")
        if self.upper_tier_layers < 1:
            raise ConfigError("upper_tier_layers must be >= 1")
        if self.e_surv is not None and not 0 <= self.e_surv < self.e_init:
            raise ConfigError("e_surv must lie in [0, e_init)")
        for name in ("sink", "auv_start"):
            point = getattr(self, name)
            if point is None:
                continue
            if len(point) != 3:
                raise ConfigError(f"{name} must have three coordinates")
            if any(not 0 <= c <= e for c, e in zip(point, self.region)):
                raise ConfigError(f"{name} lies outside the region")

    # derived values
    @property
    def survival_threshold(self) -> float:
        return 0.05 * self.e_init if self.e_surv is None else self.e_surv

    @property
    def sink_position(self) -> tuple[float, float, float]:
        if self.sink is not None:
            return tuple(self.sink)
        return (self.region[0] / 2, self.region[1] / 2, 0.0)

    @property
    def auv_start_position(self) -> tuple[float, float, float]:
        if self.auv_start is not None:
            return tuple(self.auv_start)
        return (self.region[0] / 2, self.region[1] / 2, self.region[2])

    @property
    def total_layers(self) -> int:
        return total_layers(self.region[2], self.ctr, self.k_layer)

    @property
    def epoch_rounds(self) -> int:
        """Rounds between re-clustering: one CH retention period, at least one round."""
        return max(1, math.ceil(self.retention / self.round_period - 1e-9))

    def energy_model(self) -> EnergyModel:
        return EnergyModel(e_elec=self.e_elec, amp=self.amp, spreading=self.spreading,
                           carrier_khz=self.carrier_khz, e_rx=self.e_elec, e_fuse=self.e_fuse,
                           e_idle=self.e_idle)

    def network_params(self) -> NetworkParams:
        return NetworkParams(
            node_count=self.node_count, region=tuple(self.region),
            total_layers=self.total_layers, ctr=self.ctr, k_layer=self.k_layer,
            t_cmp=self.retention, t_adv=self.t_adv, avb_set=self.avb_set,
            e_surv=self.survival_threshold, srl=self.srl,
            priority_mode=PriorityMode(self.priority_mode),
            p4_variant=P4Variant(self.p4_variant),
        )

    @property
    def radius(self) -> RadiusMode:
        return RadiusMode(self.radius_mode)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


def desk_profile(**overrides) -> ScenarioConfig:
    """100 nodes at the same spatial density as the 500-node, 500 m cube deployment."""
    side = round(500.0 * (100 / 500) ** (1 / 3))
    base = dict(node_count=100, region=(float(side),) * 3)
    base.update(overrides)
    return ScenarioConfig(**base)


PROFILES = {"full": ScenarioConfig, "desk": desk_profile}

# document layout: section -> {key: field}
SCHEMA: dict[str, dict[str, str]] = {
    "network": {"node_count": "node_count", "region_m": "region", "sink_m": "sink",
                "ctr_m": "ctr", "k_layer": "k_layer"},
    "radio": {"packet_bytes": "packet_bytes", "control_bytes": "control_bytes",
              "data_rate_bps": "data_rate", "carrier_khz": "carrier_khz",
              "spreading_exponent": "spreading"},
    "energy": {"init_j": "e_init", "idle_j_per_round": "e_idle", "fuse_j_per_bit": "e_fuse",
               "elec_j_per_bit": "e_elec", "amp_j_per_bit_m": "amp"},
    "protocol": {"name": "protocol", "retention_s": "retention", "t_adv_s": "t_adv",
                 "avb_set": "avb_set", "e_surv_j": "e_surv", "srl": "srl",
                 "priority_mode": "priority_mode", "p4_variant": "p4_variant",
                 "radius_mode": "radius_mode", "history_k": "history_k",
                 "max_bonding_retries": "max_bonding_retries", "proc_delay_s": "proc_delay",
                 "upper_tier_layers": "upper_tier_layers"},
    "mobility": {"current_mps": "current_speed", "current_turn_rad_per_s": "current_turn",
                 "jitter_mps": "jitter"},
    "auv": {"speed_mps": "auv_speed", "start_m": "auv_start"},
    "faults": {"ch_fraction": "fault_ch_fraction", "first_round": "fault_first_round"},
    "run": {"rounds": "rounds", "round_period_s": "round_period", "seed": "seed",
            "log_level": "log_level"},
}

_FIELD_TYPES = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
_INT_FIELDS = {"node_count", "k_layer", "packet_bytes", "control_bytes", "srl", "history_k",
               "max_bonding_retries", "upper_tier_layers", "fault_first_round", "rounds", "seed"}
_STR_FIELDS = {"protocol", "priority_mode", "p4_variant", "radius_mode", "log_level"}
_POINT_FIELDS = {"region", "sink", "auv_start"}
_OPTIONAL_FIELDS = {"sink", "auv_start", "e_surv"}


def _coerce(name: str, node: yaml.Node) -> Any:
    line = node.start_mark.line + 1
    value = yaml.safe_load(yaml.serialize(node))
    if value is None and name in _OPTIONAL_FIELDS:
        return None
    if name == "retention" and isinstance(value, str):
        if value not in RETENTION_PRESETS:
            raise ConfigError(f"unknown retention preset {value!r}; "
                              f"expected one of {sorted(RETENTION_PRESETS)} or seconds", line)
        return RETENTION_PRESETS[value]
    if name in _POINT_FIELDS:
        if not isinstance(value, list) or len(value) != 3 or \
                not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{name} expects a list of three numbers", line)
        return tuple(float(v) for v in value)
    if name in _STR_FIELDS:
        if not isinstance(value, str):
            raise ConfigError(f"{name} expects a string", line)
        return value
    if name in _INT_FIELDS:
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{name} expects an integer", line)
        return value
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{name} expects a number", line)
    return float(value)


def parse_config(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Parse a scenario document; missing keys keep the defaults of ``base``."""
    base = base or ScenarioConfig()
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed document: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None) from None
    if root is None:
        return base
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError("top level must be a mapping of sections", root.start_mark.line + 1)

    changes: dict[str, Any] = {}
    last_line: dict[str, int] = {}
    for key_node, section_node in root.value:
        section = key_node.value
        line = key_node.start_mark.line + 1
        if section not in SCHEMA:
            raise ConfigError(f"unknown section {section!r}", line)
        if not isinstance(section_node, yaml.MappingNode):
            raise ConfigError(f"section {section!r} must be a mapping", line)
        for k_node, v_node in section_node.value:
            key = k_node.value
            kline = k_node.start_mark.line + 1
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}", kline)
            name = SCHEMA[section][key]
            if name in changes:
                raise ConfigError(f"duplicate key {section}.{key}", kline)
            changes[name] = _coerce(name, v_node)
            last_line[name] = kline
    try:
        return dataclasses.replace(base, **changes)
    except ConfigError as exc:
        culprit = next((n for n in last_line if n in str(exc)), None)
        raise ConfigError(str(exc), last_line.get(culprit)) from None


def render_config(cfg: ScenarioConfig) -> str:
    doc: dict[str, dict[str, Any]] = {}
    for section, keys in SCHEMA.items():
        doc[section] = {}
        for key, name in keys.items():
            value = getattr(cfg, name)
            if isinstance(value, tuple):
                value = [float(v) for v in value]
            doc[section][key] = value
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


def load_config(path: str, profile: str = "full") -> ScenarioConfig:
    base = PROFILES[profile]()
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base)
