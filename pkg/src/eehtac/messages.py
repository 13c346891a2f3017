"""Protocol packets exchanged during setup, recovery and the data phase."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field


@dataclass(frozen=True)
class Hello:
    tag: int
    layer: int
    avb: float
    energy_rsd: float


@dataclass(frozen=True)
class Polling:
    tag: int
    layer: int
    avb: float
    rad_cmp: float
    energy_rsd: float


@dataclass(frozen=True)
class Join:
    sender_tag: int
    target_primary_tag: int
    energy_rsd_of_sender: float


@dataclass(frozen=True)
class Ack:
    from_tag: int
    to_tag: int


@dataclass(frozen=True)
class Data:
    origin_tag: int
    payload_bytes: int
    hop_trace: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.payload_bytes <= 0:
            raise ValueError("payload_bytes must be positive")


KINDS = {Hello: "HELLO", Polling: "POLLING", Join: "JOIN", Ack: "ACK", Data: "DATA"}


def as_record(msg) -> tuple[str, dict]:
    return KINDS[type(msg)], asdict(msg)
