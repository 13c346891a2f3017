"""Q-predicate CH election (the four MPCF scenarios)."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .clustering import NeighborhoodSnapshot, unit_step


class TopologyCorrupt(ValueError):
    """Snapshot has duplicate, out-of-range or self-referencing tags."""


class Scenario(enum.Enum):
    S1 = 1  # becomes CH: no CH neighbour, beats uncovered competitors
    S2 = 2  # keeps CH role
    S3 = 3  # replaces a neighbouring CH by more than the threshold
    S4 = 4  # cluster member


@dataclass(frozen=True)
class QVector:
    q1: int
    q2: int
    q3: int
    q4: int
    q5: int
    q6: int
    q7: int
    q8: int
    q9: int
    q10: int
    q11: int

    def terms(self) -> tuple[int, int, int]:
        return (
            self.q1 * self.q2 * self.q3 * self.q4,
            self.q5 * self.q6 * self.q7,
            self.q8 * self.q9 * self.q10 * self.q11,
        )


@dataclass(frozen=True)
class ElectionOutcome:
    becomes_ch: int
    fired_scenario: Scenario


def _check(snapshot: NeighborhoodSnapshot) -> None:
    seen = set()
    n = snapshot.network_size
    if not 1 <= snapshot.focal <= n:
        raise TopologyCorrupt(f"focal tag {snapshot.focal} outside 1..{n}")
    for rec in snapshot.records:
        if rec.tag in seen:
            raise TopologyCorrupt(f"duplicate tag {rec.tag}")
        if rec.tag == snapshot.focal or not 1 <= rec.tag <= n:
            raise TopologyCorrupt(f"bad neighbour tag {rec.tag}")
        seen.add(rec.tag)


def _ch_flag(node) -> int:
    flag = getattr(node, "is_ch", node)
    return 1 if flag else 0


def q_vector(node, snapshot: NeighborhoodSnapshot, avb_focal: float,
             avb_set: float) -> QVector:
    """Evaluate Q1..Q11 for one node.

    ``node`` is a NodeState or a bare 0/1 CH indicator. Tags absent from
    ``snapshot.records`` count as non-adjacent; their factor in each product
    collapses to a comparison of ``avb_focal`` with zero.
    """
    _check(snapshot)
    m = snapshot.focal
    ch_m = _ch_flag(node)
    x = avb_focal

    ch_links = 0
    q3 = q4 = q6 = q7 = q10 = q11 = 1
    n_lower = n_higher = 0
    for r in snapshot.records:
        adj = 1 if r.adj else 0
        ch_k = 1 if r.is_ch else 0
        uncovered = 1 - (1 if r.is_covered else 0)
        ch_links += ch_k * adj
        if r.tag < m:
            n_lower += 1
            q3 *= unit_step(x - adj * r.avb * uncovered)
            q6 *= unit_step(x - adj * r.avb * ch_k)
            q10 *= unit_step(x - adj * (r.avb + avb_set) * ch_k)
        else:
            n_higher += 1
            q4 *= 1 - unit_step(adj * r.avb * uncovered - x)
            q7 *= 1 - unit_step(adj * r.avb * ch_k - x)
            q11 *= 1 - unit_step(adj * (r.avb + avb_set) * ch_k - x)

    implicit_lower = (m - 1) - n_lower
    implicit_higher = (snapshot.network_size - m) - n_higher
    if implicit_lower < 0 or implicit_higher < 0:
        raise TopologyCorrupt("more records than the tag range allows")
    if implicit_lower and not unit_step(x):
        q3 = q6 = q10 = 0
    if implicit_higher and unit_step(-x):
        q4 = q7 = q11 = 0

    q2 = 1 - unit_step(ch_links)
    return QVector(
        q1=1 - ch_m, q2=q2, q3=q3, q4=q4,
        q5=ch_m, q6=q6, q7=q7,
        q8=1 - ch_m, q9=unit_step(ch_links), q10=q10, q11=q11,
    )


def outcome_from_q(q: QVector) -> ElectionOutcome:
    s1, s2, s3 = q.terms()
    total = s1 + s2 + s3
    if total > 1:
        raise AssertionError(f"scenario terms overlap: {q}")
    if s1:
        return ElectionOutcome(1, Scenario.S1)
    if s2:
        return ElectionOutcome(1, Scenario.S2)
    if s3:
        return ElectionOutcome(1, Scenario.S3)
    return ElectionOutcome(0, Scenario.S4)


def elect(node, snapshot: NeighborhoodSnapshot, avb_focal: float,
          avb_set: float) -> ElectionOutcome:
    return outcome_from_q(q_vector(node, snapshot, avb_focal, avb_set))
