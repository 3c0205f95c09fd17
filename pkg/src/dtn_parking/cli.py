"""Command line front end: run seed sweeps, validate configs, aggregate reports.

Exit codes are 0 on success, 2 for configuration problems, 3 for runtime or
I/O failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import statistics
import sys
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from .config import ConfigError, build_scenario, dump_config, load_config
from .core import MessageKind
from .engine import KIND_KEYS, metrics_document, run_simulation
from .membership import ScriptParseError
from .mobility import TraceParseError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

_PER_KIND = (
    "created", "delivered", "delivery_ratio", "expired", "buffered", "transmissions",
    "duplicate_deliveries", "overhead_ratio", "latency_mean", "latency_median",
    "latency_p95", "hops_mean",
)

# Column order of metrics documents and report rows.  Keys missing from a
# document (e.g. latency when nothing was delivered) become empty cells.
METRIC_KEYS: List[str] = [f"{KIND_KEYS[k]}_{f}" for k in MessageKind for f in _PER_KIND] + [
    "transmissions", "aborted_transmissions", "delivered", "overhead_ratio",
    "booking_requests", "booking_skipped_full", "booking_acks", "booking_repeat_acks",
    "booking_rejects", "booking_releases", "booking_expired_holds", "booking_live",
    "booking_acks_received", "booking_rejects_received", "booking_success_ratio",
]
REPORT_COLUMNS: List[str] = ["scenario", "router", "seed"] + METRIC_KEYS


class MissingMetrics(Exception):
    def __init__(self, path):
        super().__init__(f"no metrics documents found in {path}")
        self.path = str(path)


def write_atomic(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file in the same directory and a rename."""
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def metrics_json(doc: Dict) -> str:
    ordered = {k: doc[k] for k in ("scenario", "router", "seed")}
    ordered.update((k, doc[k]) for k in METRIC_KEYS if k in doc)
    return json.dumps(ordered, indent=2) + "\n"


def cmd_validate(config_path: str, out=None) -> int:
    out = out or sys.stdout
    cfg = load_config(config_path)
    out.write(dump_config(cfg))
    return EXIT_OK


def cmd_run(config_path: str, out_dir: str, seed_override: Optional[int] = None, log=None) -> int:
    log = log or sys.stderr
    base = Path(config_path).resolve().parent
    cfg = load_config(config_path)
    seeds = [seed_override] if seed_override is not None else list(cfg.engine.seeds)
    if seed_override is not None:
        cfg = cfg.model_copy(update={"engine": cfg.engine.model_copy(update={"seeds": seeds})})
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_atomic(out / "config.json", dump_config(cfg))
    for seed in seeds:
        scenario, run_cfg = build_scenario(cfg, seed, base_dir=base)
        result = run_simulation(scenario, run_cfg)
        write_atomic(out / f"metrics-{seed}.json", metrics_json(metrics_document(result, scenario, run_cfg)))
        write_atomic(out / f"trace-{seed}.csv", result.trace)
        log.write(f"{cfg.name} seed {seed}: done\n")
    return EXIT_OK


def _seed_key(p: Path):
    stem = p.stem[len("metrics-"):]
    return (0, int(stem), "") if stem.isdigit() else (1, 0, stem)


def collect_rows(dirs: Iterable[str]) -> List[Dict]:
    rows = []
    for d in dirs:
        path = Path(d)
        files = sorted(path.glob("metrics-*.json"), key=_seed_key) if path.is_dir() else []
        if not files:
            raise MissingMetrics(path)
        for f in files:
            rows.append(json.loads(f.read_text(encoding="utf-8")))
    return rows


def summary_rows(rows: Sequence[Dict], stat: str = "mean") -> List[Dict]:
    """One aggregate row per (scenario, router), in order of first appearance."""
    agg = statistics.fmean if stat == "mean" else statistics.median
    groups: Dict[tuple, List[Dict]] = {}
    for r in rows:
        groups.setdefault((r["scenario"], r["router"]), []).append(r)
    out = []
    for (scenario, router), members in groups.items():
        row = {"scenario": scenario, "router": router, "seed": stat}
        for k in METRIC_KEYS:
            vals = [m[k] for m in members if m.get(k) is not None]
            if vals:
                row[k] = agg(vals)
        out.append(row)
    return out


def render_report(rows: Sequence[Dict], stat: str = "mean") -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in list(rows) + summary_rows(rows, stat):
        w.writerow({k: r.get(k, "") for k in REPORT_COLUMNS})
    return buf.getvalue()


def cmd_report(dirs: Sequence[str], stat: str = "mean", out=None) -> int:
    out = out or sys.stdout
    out.write(render_report(collect_rows(dirs), stat))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dtn-parking", description="DTN smart-parking routing simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every seed of a scenario config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed-override", type=int, default=None, metavar="N",
                   help="run only this seed instead of the config's seed list")

    rep = sub.add_parser("report", help="aggregate run directories into CSV on stdout")
    rep.add_argument("dirs", nargs="*")
    rep.add_argument("--stat", choices=("mean", "median"), default="mean",
                     help="statistic used for the per-(scenario, router) summary rows")

    v = sub.add_parser("validate", help="parse a config and print its normalised form")
    v.add_argument("--config", required=True)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config, args.out, args.seed_override)
        if args.command == "report":
            return cmd_report(args.dirs, args.stat)
        return cmd_validate(args.config)
    except (ConfigError, ScriptParseError, TraceParseError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        if args.command in ("run", "validate") and exc.filename == args.config:
            print(f"config error: cannot read {exc.filename}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, MissingMetrics, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
