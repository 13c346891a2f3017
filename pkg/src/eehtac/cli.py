"""Command-line driver: validate, run, sweep and report."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .config import (PROFILES, RETENTION_PRESETS, ConfigError, ScenarioConfig, parse_config,
                     render_config)
from .metrics import LEDGER_COLUMNS, LedgerRow
from .simulation import Simulation, format_value

CSV_SCHEMA_VERSION = 1
WORKERS_ENV = "EEHTAC_WORKERS"
MID_RUN = (300, 700)


@dataclass
class RunManifest:
    config: str  # rendered scenario document
    seeds: list[int]
    protocol: str
    outputs: dict[str, str] = field(default_factory=dict)
    tool_version: str = __version__
    csv_schema: int = CSV_SCHEMA_VERSION
    started: str = ""
    wall_seconds: float = 0.0
    host: str = field(default_factory=platform.node)


def ledger_csv(rows: Sequence[LedgerRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEDGER_COLUMNS)
    for row in rows:
        w.writerow([format_value(v) for v in row.as_tuple()])
    return buf.getvalue()


def read_ledger(path: Path) -> list[dict[str, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != LEDGER_COLUMNS:
            raise ValueError(f"{path}: unexpected ledger header")
        return [{k: float(v) for k, v in r.items()} for r in reader]


def summarize(rows: Sequence[LedgerRow], window=MID_RUN) -> dict[str, float]:
    """Final cumulative metrics plus windowed means of the bounded statistics."""
    if not rows:
        return {}
    last = rows[-1]
    mid = [r for r in rows if window[0] <= r.round <= window[1]] or list(rows)
    out = {c: getattr(last, c) for c in ("sigma", "theta", "cfd", "cfr", "delta", "omega")}
    for c in ("stb", "cld", "dch", "ttvr"):
        out[c] = float(np.mean([getattr(r, c) for r in mid]))
    out["frac_stb_045"] = float(np.mean([r.stb >= 0.45 for r in rows]))
    out["frac_cld_050"] = float(np.mean([r.cld >= 0.50 for r in rows]))
    out["rounds"] = last.round
    return out


def execute(cfg: ScenarioConfig, out_dir: Path | None, tag: str = "") -> tuple[list[LedgerRow], dict]:
    """Run one scenario, optionally writing ledger, event log and summary."""
    t0 = time.time()
    log_fh = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        log_fh = open(out_dir / f"events{tag}.jsonl", "w", encoding="utf-8")
    try:
        sim = Simulation(cfg, log_fh)
        rows = sim.run()
    finally:
        if log_fh is not None:
            log_fh.close()
    summary = summarize(rows)
    summary["detected"] = sim.totals.detected
    summary["occurred"] = sim.totals.occurred
    summary["wall_seconds"] = time.time() - t0
    if out_dir is not None:
        (out_dir / f"ledger{tag}.csv").write_text(ledger_csv(rows), encoding="utf-8")
        (out_dir / f"summary{tag}.json").write_text(json.dumps(summary, indent=2, sort_keys=True),
                                                   encoding="utf-8")
    return rows, summary


def _retention(value: str) -> float:
    if value in RETENTION_PRESETS:
        return RETENTION_PRESETS[value]
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"retention must be seconds or one of {sorted(RETENTION_PRESETS)}") from None


def _csv_list(kind):
    def parse(value: str):
        items = [v.strip() for v in value.split(",") if v.strip()]
        return [kind(v) for v in items]
    return parse


def load_scenario(args) -> ScenarioConfig:
    base = PROFILES[args.profile]()
    if args.config:
        text = Path(args.config).read_text(encoding="utf-8")
        base = parse_config(text, base)
    overrides = {}
    for name in ("seed", "protocol", "rounds", "retention", "fault_ch_fraction", "log_level"):
        value = getattr(args, name, None)
        if value is not None and not isinstance(value, list):
            overrides[name] = value
    return base.replace(**overrides) if overrides else base


def cmd_validate(args) -> int:
    cfg = load_scenario(args)
    print(f"ok: {cfg.node_count} nodes, {cfg.rounds} rounds, protocol {cfg.protocol}, "
          f"retention {cfg.retention} s, {cfg.total_layers} layers")
    return 0


def cmd_run(args) -> int:
    cfg = load_scenario(args)
    out = Path(args.out)
    manifest = RunManifest(config=render_config(cfg), seeds=[cfg.seed], protocol=cfg.protocol,
                           started=time.strftime("%Y-%m-%dT%H:%M:%S"))
    t0 = time.time()
    _, summary = execute(cfg, out)
    manifest.wall_seconds = time.time() - t0
    manifest.outputs = {"ledger": "ledger.csv", "events": "events.jsonl",
                        "summary": "summary.json"}
    (out / "manifest.json").write_text(json.dumps(asdict(manifest), indent=2), encoding="utf-8")
    print(json.dumps({k: summary[k] for k in sorted(summary)}, indent=2))
    return 0


def _cell(job):
    cfg, out_dir, tag = job
    try:
        _, summary = execute(cfg, out_dir, tag)
        return tag, "ok", summary
    except Exception as exc:  # reported per cell
        return tag, f"error: {exc}", {}


def cell_tag(protocol: str, retention: float, seed: int) -> str:
    return f"_{protocol}_r{retention:g}_s{seed}"


def sweep(base: ScenarioConfig, protocols, retentions, seeds, out: Path | None,
          workers: int = 1) -> dict:
    if not protocols or not retentions or not seeds:
        raise ValueError("sweep grid is empty")
    jobs = []
    for proto in protocols:
        for ret in retentions:
            for seed in seeds:
                cfg = base.replace(protocol=proto, retention=ret, seed=seed)
                jobs.append((cfg, out, cell_tag(proto, ret, seed)))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_cell, jobs))
    else:
        results = [_cell(j) for j in jobs]
    status = {tag: st for tag, st, _ in results}
    by_tag = {tag: s for tag, _, s in results}
    table = []
    for proto in protocols:
        for ret in retentions:
            runs = [by_tag[cell_tag(proto, ret, s)] for s in seeds if by_tag[cell_tag(proto, ret, s)]]
            row = {"protocol": proto, "retention": ret, "runs": len(runs)}
            if runs:
                for key in runs[0]:
                    if key != "wall_seconds":
                        row[key] = float(np.mean([r[key] for r in runs]))
            table.append(row)
    report = {"cells": table, "status": status, "verdicts": verdicts(table)}
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.json").write_text(json.dumps(report, indent=2, sort_keys=True),
                                        encoding="utf-8")
        (out / "sweep.csv").write_text(table_csv(table), encoding="utf-8")
    return report


def table_csv(table: list[dict]) -> str:
    keys = ["protocol", "retention", "runs", "sigma", "theta", "cfd", "cfr", "delta", "omega",
            "stb", "cld", "dch", "ttvr", "frac_stb_045", "frac_cld_050"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for row in table:
        w.writerow([format_value(row[k]) if isinstance(row.get(k), float) else row.get(k, "")
                    for k in keys])
    return buf.getvalue()


def verdicts(table: list[dict]) -> dict[str, bool]:
    """Ordering checks over the cells present in a sweep table."""
    out: dict[str, bool] = {}
    mine = {r["retention"]: r for r in table if r["protocol"] == "eehtac" and r["runs"]}
    if {0.1, 90.0, 300.0} <= set(mine):
        a, b, c = mine[0.1], mine[90.0], mine[300.0]
        out["stb_90_gt_0.1"] = b["stb"] > a["stb"]
        out["cld_90_gt_0.1_gt_300"] = b["cld"] > a["cld"] > c["cld"]
        out["ttvr_0.1_gt_90_gt_300"] = a["ttvr"] > b["ttvr"] > c["ttvr"]
        out["frac_stb_90_gt_0.1"] = b["frac_stb_045"] > a["frac_stb_045"]
        out["frac_cld_300_lt_5pct"] = c["frac_cld_050"] < 0.05
    for ret in sorted({r["retention"] for r in table}):
        ours = next((r for r in table if r["protocol"] == "eehtac" and r["retention"] == ret
                     and r["runs"]), None)
        base = [r for r in table if r["protocol"].startswith("eulc") and r["retention"] == ret
                and r["runs"]]
        if ours and base:
            best = max(r["theta"] for r in base)
            out[f"theta_gain_10pct_r{ret:g}"] = ours["theta"] >= 1.1 * best
            if all(r.get("detected", 0) > 0 for r in base):
                out[f"baseline_cfr_zero_r{ret:g}"] = all(r["cfr"] == 0.0 for r in base)
    return out


def cmd_sweep(args) -> int:
    base = load_scenario(args)
    workers = int(os.environ.get(WORKERS_ENV, "1"))
    protocols = [base.protocol] if args.protocols is None else args.protocols
    retentions = [base.retention] if args.retentions is None else args.retentions
    seeds = [base.seed] if args.seeds is None else args.seeds
    try:
        report = sweep(base, protocols, retentions, seeds, Path(args.out), workers)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(table_csv(report["cells"]), end="")
    for name, ok in report["verdicts"].items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    failed = [t for t, s in report["status"].items() if s != "ok"]
    for t in failed:
        print(f"cell {t}: {report['status'][t]}", file=sys.stderr)
    return 1 if failed else 0


def cmd_report(args) -> int:
    """Per-round means across seeds for each sweep cell, as plot-ready CSV."""
    src = Path(args.dir)
    sweep_file = src / "sweep.json"
    if not sweep_file.exists():
        print(f"error: {sweep_file} not found", file=sys.stderr)
        return 2
    report = json.loads(sweep_file.read_text(encoding="utf-8"))
    groups: dict[str, list[Path]] = {}
    for path in sorted(src.glob("ledger_*_s*.csv")):
        key = path.stem[len("ledger_"):].rsplit("_s", 1)[0]
        groups.setdefault(key, []).append(path)
    for key, paths in groups.items():
        ledgers = [read_ledger(p) for p in paths]
        n = min(len(l) for l in ledgers)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LEDGER_COLUMNS)
        for i in range(n):
            w.writerow([format_value(float(np.mean([l[i][c] for l in ledgers])))
                        if c != "round" else int(ledgers[0][i]["round"]) for c in LEDGER_COLUMNS])
        (src / f"plot_{key}.csv").write_text(buf.getvalue(), encoding="utf-8")
    print(table_csv(report["cells"]), end="")
    for name, ok in report["verdicts"].items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eehtac", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="verb", required=True)

    def scenario_args(sp, grid=False):
        sp.add_argument("config", nargs="?", help="scenario document (YAML)")
        sp.add_argument("--profile", choices=sorted(PROFILES), default="full")
        sp.add_argument("--rounds", type=int)
        sp.add_argument("--fault-ch-fraction", dest="fault_ch_fraction", type=float)
        sp.add_argument("--log-level", dest="log_level", choices=("events", "messages"))
        if grid:
            sp.add_argument("--protocols", type=_csv_list(str))
            sp.add_argument("--retentions", type=_csv_list(_retention))
            sp.add_argument("--seeds", type=_csv_list(int))
        else:
            sp.add_argument("--seed", type=int)
            sp.add_argument("--protocol", choices=("eehtac", "eulc1", "eulc2", "eulc3", "eulc4"))
            sp.add_argument("--retention", type=_retention, help="seconds or preset name")

    v = sub.add_parser("validate", help="check a scenario document")
    scenario_args(v)
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="run one scenario")
    scenario_args(r)
    r.add_argument("--out", default="out")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a protocol x retention x seed grid")
    scenario_args(s, grid=True)
    s.add_argument("--out", default="sweep")
    s.set_defaults(func=cmd_sweep)

    rep = sub.add_parser("report", help="aggregate a sweep directory into plot-ready CSV")
    rep.add_argument("dir")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
