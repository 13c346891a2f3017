"""Brute-force reference for the CH election.

Evaluates every Q term by walking the full tag range 1..N, including
non-adjacent nodes, with its own step function. It does not import the
election module so it can serve as an independent check in tests.
"""

from __future__ import annotations

from dataclasses import dataclass

MAX_ORACLE_NODES = 12


@dataclass(frozen=True)
class OracleNetwork:
    """Complete network state indexed by tag - 1."""

    ch: tuple[int, ...]
    cov: tuple[int, ...]
    avb: tuple[float, ...]
    adj: tuple[tuple[int, ...], ...]
    avb_set: float

    @property
    def size(self) -> int:
        return len(self.ch)


def _u(x):
    if x > 0:
        return 1
    return 0


def oracle_elect(net: OracleNetwork) -> list[tuple[int, int]]:
    """Return ``(becomes_ch, scenario)`` for tags 1..N; scenario 4 means CM."""
    n = net.size
    if n > MAX_ORACLE_NODES:
        raise ValueError(f"oracle limited to {MAX_ORACLE_NODES} nodes")
    out = []
    for m in range(1, n + 1):
        ch = lambda t: net.ch[t - 1]
        cov = lambda t: net.cov[t - 1]
        avb = lambda t: net.avb[t - 1]
        adj = lambda k: net.adj[k - 1][m - 1]
        others = [k for k in range(1, n + 1) if k != m]

        q1 = 1 - ch(m)
        q2 = 1 - _u(sum(ch(k) * adj(k) for k in others))
        q3 = 1
        for k in range(1, m):
            q3 = q3 * _u(avb(m) - adj(k) * avb(k) * (1 - cov(k)))
        q4 = 1
        for k in range(m + 1, n + 1):
            q4 = q4 * (1 - _u(adj(k) * avb(k) * (1 - cov(k)) - avb(m)))
        q5 = ch(m)
        q6 = 1
        for k in range(1, m):
            q6 = q6 * _u(avb(m) - adj(k) * avb(k) * ch(k))
        q7 = 1
        for k in range(m + 1, n + 1):
            q7 = q7 * (1 - _u(adj(k) * avb(k) * ch(k) - avb(m)))
        q8 = q1
        q9 = _u(sum(ch(k) * adj(k) for k in others))
        q10 = 1
        for k in range(1, m):
            q10 = q10 * _u(avb(m) - adj(k) * (avb(k) + net.avb_set) * ch(k))
        q11 = 1
        for k in range(m + 1, n + 1):
            q11 = q11 * (1 - _u(adj(k) * (avb(k) + net.avb_set) * ch(k) - avb(m)))

        terms = [q1 * q2 * q3 * q4, q5 * q6 * q7, q8 * q9 * q10 * q11]
        new_ch = terms[0] + terms[1] + terms[2]
        scenario = 4
        for i, term in enumerate(terms):
            if term:
                scenario = i + 1
                break
        out.append((new_ch, scenario))
    return out
