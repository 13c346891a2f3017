"""AUV data mule: greedy tours over lower-tier cluster heads, offload to the upper tier."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LINK_RANGE = 10.0  # m, CH-to-AUV hand-over distance


@dataclass
class Bundle:
    """Fused readings held at a CH or aboard the AUV."""

    readings: int = 0
    delay: float = 0.0  # summed per-reading link delay so far
    packets: int = 0  # fused packets making up the bundle

    def add(self, other: "Bundle") -> None:
        self.readings += other.readings
        self.delay += other.delay
        self.packets += other.packets


@dataclass
class Visit:
    tag: int
    arrival: float  # seconds since the tour started
    readings: int


@dataclass
class AuvState:
    position: np.ndarray
    speed: float
    tour: list[int] = field(default_factory=list)  # remaining CH tags, then offload
    cargo: Bundle = field(default_factory=Bundle)
    tour_clock: float = 0.0
    schedule: list[Visit] = field(default_factory=list)

    @property
    def idle(self) -> bool:
        return not self.tour


def nearest_neighbour_tour(start, stops: dict[int, np.ndarray]) -> list[int]:
    """Greedy tour order: repeatedly go to the closest unvisited stop (ties by tag)."""
    here = np.asarray(start, dtype=float)
    left = dict(stops)
    order = []
    while left:
        tag = min(left, key=lambda t: (float(np.linalg.norm(left[t] - here)), t))
        order.append(tag)
        here = left.pop(tag)
    return order


def _move_towards(pos: np.ndarray, target: np.ndarray, budget: float) -> tuple[np.ndarray, float]:
    gap = float(np.linalg.norm(target - pos))
    if gap <= budget:
        return target.copy(), budget - gap
    return pos + (target - pos) * (budget / gap), 0.0


def auv_round(state: AuvState, buffers: dict[int, Bundle], locate, offload_target,
              collect, deliver, time_budget: float) -> list[Visit]:
    """Advance the AUV by ``time_budget`` seconds.

    ``buffers`` maps CH tag to its pending bundle; ``locate(tag)`` returns a
    position or None if the holder is gone; ``offload_target()`` returns the
    drop-off position; ``collect(tag, bundle)`` charges the hand-over and
    returns the bundle actually received; ``deliver(bundle)`` pushes cargo
    to the sink path. Returns the visits completed this call.
    """
    if state.idle:
        stops = {t: np.asarray(locate(t), dtype=float) for t, b in buffers.items()
                 if b.readings > 0 and locate(t) is not None}
        if not stops:
            return []
        state.tour = nearest_neighbour_tour(state.position, stops) + [0]  # 0: offload
        state.tour_clock = 0.0
        state.schedule = []
    budget = time_budget * state.speed
    done = []
    while state.tour and budget > 0:
        tag = state.tour[0]
        if tag == 0:
            target = np.asarray(offload_target(), dtype=float)
        else:
            where = locate(tag)
            if where is None:
                state.tour.pop(0)
                continue
            target = np.asarray(where, dtype=float)
        before = budget
        state.position, budget = _move_towards(state.position, target, budget)
        state.tour_clock += (before - budget) / state.speed
        if np.linalg.norm(state.position - target) > 1e-9:
            break
        state.tour.pop(0)
        if tag == 0:
            deliver(state.cargo)
            state.cargo = Bundle()
            continue
        got = collect(tag, buffers.pop(tag, Bundle()))
        state.cargo.add(got)
        visit = Visit(tag, state.tour_clock, got.readings)
        state.schedule.append(visit)
        done.append(visit)
    return done


def visit_time(distance: float, speed: float) -> float:
    if speed <= 0:
        raise ValueError("speed must be positive")
    return distance / speed if math.isfinite(distance) else math.inf
