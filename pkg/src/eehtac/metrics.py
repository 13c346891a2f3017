"""Evaluation metrics: stability, load distribution, drift ratio and the per-round ledger."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Mapping, Sequence

import numpy as np

LEDGER_COLUMNS = ("round", "sigma", "theta", "cfd", "cfr", "delta", "omega",
                  "stb", "cld", "dch", "ttvr")


def tcl(window: Sequence[int]) -> float:
    """Fraction of the sampled retention periods a node spent as CH."""
    if len(window) == 0:
        return 0.0
    return float(sum(window)) / len(window)


def node_stability(samples: Sequence[int], dt: float) -> float:
    """exp(-L) where L counts CH-status flips per unit of window time.

    ``samples`` runs oldest to newest and includes the current status, so a
    window of k periods has k + 1 samples.
    """
    k = len(samples) - 1
    if k < 1:
        return 1.0
    if dt <= 0:
        raise ValueError("dt must be positive")
    flips = sum(abs(int(samples[a]) - int(samples[a - 1])) for a in range(1, len(samples)))
    return math.exp(-flips / (k * dt))


def cluster_stability(stb_values: Sequence[float]) -> float:
    if len(stb_values) == 0:
        return 1.0
    return float(np.mean(stb_values))


def dch(tcl_values: Sequence[float]) -> float:
    if len(tcl_values) == 0:
        return 0.0
    return float(np.mean(tcl_values))


def cld(tcl_values: Sequence[float], dch_value: float | None = None) -> float:
    if len(tcl_values) == 0:
        return 1.0
    arr = np.asarray(tcl_values, dtype=float)
    centre = arr.mean() if dch_value is None else dch_value
    return float(1.0 - math.sqrt(np.mean((arr - centre) ** 2)))


def drift_mode(drifts: Sequence[float], bin_width: float = 1.0) -> float:
    """Representative value of the most populated drift bin.

    The modal bin is found on a fixed-width histogram (ties go to the smaller
    bin) and represented by the mean of its samples. If that is zero the
    next populated bin with a nonzero value is used instead.
    """
    arr = np.asarray(drifts, dtype=float)
    if arr.size == 0:
        return 0.0
    idx = np.floor(arr / bin_width).astype(np.int64)
    bins, counts = np.unique(idx, return_counts=True)
    order = sorted(range(len(bins)), key=lambda i: (-counts[i], bins[i]))
    modal = bins[order[0]]
    value = float(arr[idx == modal].mean())
    if value > 0:
        return value
    for b in bins:
        v = float(arr[idx == b].mean())
        if v > 0:
            return v
    return 0.0


def ttvr(drifts: Sequence[float], bin_width: float = 1.0) -> float:
    """Mean drift over modal drift; zero when there is no motion to report."""
    arr = np.asarray(drifts, dtype=float)
    if arr.size == 0:
        return 0.0
    mode = drift_mode(arr, bin_width)
    if mode <= 0:
        return 0.0
    return float(arr.mean() / mode)


@dataclass
class LedgerRow:
    round: int
    sigma: float
    theta: int
    cfd: float
    cfr: float
    delta: float
    omega: float
    stb: float
    cld: float
    dch: float
    ttvr: float

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in LEDGER_COLUMNS)


@dataclass
class LedgerTotals:
    """Cumulative counters folded from round events."""

    energy: float = 0.0
    received: int = 0
    occurred: int = 0
    detected: int = 0
    recovered: int = 0
    delay: float = 0.0
    control_time: float = 0.0
    cfr_by_convention: bool = True

    def absorb(self, event: Mapping) -> None:
        kind = event["kind"]
        if kind == "round_summary":
            self.energy += event["energy"]
            self.received += event["delivered"]
            self.delay += event["delay"]
            self.control_time += event["control_time"]
        elif kind == "failure":
            self.occurred += 1
            if event["detected"]:
                self.detected += 1
        elif kind == "recovery":
            if event["path"] in ("FTBC1", "FTBC2"):
                self.recovered += 1

    @property
    def cfd(self) -> float:
        if self.occurred == 0:
            return 100.0
        return 100.0 * self.detected / self.occurred

    @property
    def cfr(self) -> float:
        if self.detected == 0:
            return 100.0
        return 100.0 * self.recovered / self.detected


def window_statistics(histories: Iterable[Sequence[int]], current: Iterable[int],
                      dt: float) -> tuple[float, float, float]:
    """(STB, CLD, DCH) over the given nodes' CH histories."""
    stbs = []
    tcls = []
    for hist, now in zip(histories, current):
        tcls.append(tcl(hist))
        stbs.append(node_stability(list(hist) + [now], dt))
    d = dch(tcls)
    return cluster_stability(stbs), cld(tcls, d), d


def round_ledger(round_index: int, events: Iterable[Mapping], totals: LedgerTotals,
                 histories: Sequence[Sequence[int]], current: Sequence[int], dt: float,
                 drifts: Sequence[float], elapsed: float, bin_width: float = 1.0) -> LedgerRow:
    """Fold one round's events into ``totals`` and return the ledger row."""
    for ev in events:
        totals.absorb(ev)
    stb_v, cld_v, dch_v = window_statistics(histories, current, dt)
    omega = totals.control_time / elapsed if elapsed > 0 else 0.0
    return LedgerRow(
        round=round_index,
        sigma=totals.energy,
        theta=totals.received,
        cfd=totals.cfd,
        cfr=totals.cfr,
        delta=totals.delay,
        omega=omega,
        stb=stb_v,
        cld=cld_v,
        dch=dch_v,
        ttvr=ttvr(drifts, bin_width),
    )


def ledger_as_dict(row: LedgerRow) -> dict:
    return asdict(row)


assert tuple(f.name for f in fields(LedgerRow)) == LEDGER_COLUMNS
