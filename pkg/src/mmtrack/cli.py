"""Command-line entry point: simulate, run, evaluate, info, bench."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import List, Optional

from . import __version__
from .config import resolve_config
from .errors import MMTrackError
from .evaluation import evaluate_files, fall_latencies
from .pipeline import Pipeline, latency_percentiles, merged_packets, run_pipeline
from .radar_math import summary
from .simulator import load_scenario, recording_files, simulate, stream
from .status import JournalSink, Notifier, WebhookSink

log = logging.getLogger("mmtrack")


def _cmd_simulate(args):
    sc = load_scenario(args.scenario, args.seed)
    out = simulate(sc, args.out)
    n = {rid: len(p) for rid, p in out.packets.items()}
    print(f"scenario {sc.name or args.scenario}: {sc.n_ticks} ticks, {len(sc.actors)} actor(s)")
    for rid in sorted(n):
        print(f"  radar {rid}: {n[rid]} packets, {out.dropped[rid]} dropped, {out.corrupted[rid]} corrupted")
    print(f"wrote {args.out}")
    return 0


def _cmd_run(args):
    cfg = resolve_config(args.config)
    files = recording_files(args.input)
    out_dir = Path(args.out) if args.out else Path(args.input) / "run"
    sinks = [WebhookSink(args.webhook)] if args.webhook else []
    out_dir.mkdir(parents=True, exist_ok=True)
    notifier = Notifier(sinks, journal=JournalSink(out_dir / "alerts.jsonl")) if sinks else None
    feed = stream(files, speed=args.speed)
    pipe = Pipeline(cfg, notifier)
    res = run_pipeline(cfg, _counting(feed, pipe), out_dir, pipeline=pipe)
    s = res.summary
    print(f"{s['ticks']} windows ({s['processed_ticks']} processed) in {s['elapsed_s']} s; "
          f"{s['tracks']} track(s); {s['bad_packets']} bad packet(s)")
    if notifier is not None and notifier.failures:
        print(f"{len(notifier.failures)} notification(s) failed", file=sys.stderr)
    print(f"wrote {out_dir}")
    return 0


def _counting(feed, pipe):
    # decode failures are counted by the producer threads; hand the total to the pipeline at the end
    yield from feed
    pipe.note_bad(feed.bad_packets)


def _cmd_evaluate(args):
    rep = evaluate_files(args.pred, args.truth)
    d = rep.to_dict()
    truth_dir = Path(args.truth) if Path(args.truth).is_dir() else Path(args.truth).parent
    meta_path = truth_dir / "scenario.json"
    events_path = (Path(args.pred) if Path(args.pred).is_dir() else Path(args.pred).parent) / "events.jsonl"
    if meta_path.exists() and events_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        contacts = [int(round(f["contact_s"] * 20)) for f in meta.get("falls", [])]
        with open(events_path, encoding="utf-8") as fh:
            ticks = [r["tick"] for r in map(json.loads, fh) if r.get("kind") == "fall"]
        d["fall_latency_ticks"] = fall_latencies(ticks, contacts)
    print(f"sensitivity {rep.sensitivity:.4f}  precision {rep.precision:.4f}  "
          f"status accuracy {rep.status_accuracy:.4f}")
    print(f"positives {rep.positives}  TP {rep.true_positives}  FP {rep.false_positives}  "
          f"id switches {rep.id_switches}  swaps {rep.swaps}  fall events {rep.events}")
    print("confusion (rows truth, cols predicted; " + ", ".join(rep.labels) + ")")
    for row in rep.confusion:
        print("  " + " ".join(f"{v:7d}" for v in row))
    if args.report:
        Path(args.report).write_text(json.dumps(d, indent=2, default=_nan_none), encoding="utf-8")
        print(f"wrote {args.report}")
    return 0


def _nan_none(v):
    return None if isinstance(v, float) and math.isnan(v) else str(v)


def _cmd_info(args):
    s = summary()
    print(f"mmtrack {__version__}")
    print(f"chirp slope          {s['slope_hz_per_s'] / 1e12:.1f} MHz/us")
    print(f"bandwidth            {s['bandwidth_hz'] / 1e9:.2f} GHz")
    print(f"chirp time           {s['chirp_time_s'] * 1e6:.2f} us")
    print(f"wavelength           {s['wavelength_m'] * 1e3:.3f} mm")
    print(f"range resolution     {s['range_resolution_m']:.4f} m")
    print(f"IF at 4 m            {s['if_frequency_at_max_distance_hz'] / 1e6:.3f} MHz")
    print(f"max velocity         {s['max_unambiguous_velocity_m_s']:.3f} m/s")
    print("interference probability (5.6 MHz band)")
    for n, p in s["interference_probability"].items():
        print(f"  {n} radar(s)         {p:.4f}")
    return 0


def _cmd_bench(args):
    cfg = resolve_config(args.config)
    files = recording_files(args.input)
    pipe = Pipeline(cfg)
    t0 = time.perf_counter()
    res = run_pipeline(cfg, merged_packets(files, on_bad=lambda rid, o: pipe.note_bad()), pipeline=pipe)
    elapsed = time.perf_counter() - t0
    rate = pipe.ticks / elapsed if elapsed > 0 else math.inf
    print(f"{pipe.ticks} windows from {len(files)} radar(s) in {elapsed:.2f} s: {rate:.1f} windows/s")
    print(f"{len(res.rows)} track rows, {len(res.events)} fall event(s), {pipe.bad_packets} bad packet(s)")
    print(f"{'stage':<10} {'p50 ms':>9} {'p95 ms':>9} {'p99 ms':>9}")
    for stage, q in latency_percentiles(pipe.timings).items():
        print(f"{stage:<10} {q['p50']:9.3f} {q['p95']:9.3f} {q['p99']:9.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mmtrack", description="Multi-radar human tracking and fall detection.")
    ap.add_argument("--version", action="version", version=f"mmtrack {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate radar recordings and ground truth")
    p.add_argument("--scenario", required=True, help="scenario JSON file or bundled name")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("run", help="track a recording directory")
    p.add_argument("--config", help="pipeline config JSON (default: $MMTRACK_CONFIG, then built-in)")
    p.add_argument("--input", required=True, help="directory holding radar<k>.mmr")
    p.add_argument("--speed", type=float, default=math.inf, help="replay speed, 1.0 = real time (default: as fast as possible)")
    p.add_argument("--out", help="output directory (default: <input>/run)")
    p.add_argument("--webhook", help="POST fall events to this URL")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("evaluate", help="score a run against ground truth")
    p.add_argument("--pred", required=True, help="run directory or trajectories.csv")
    p.add_argument("--truth", required=True, help="truth.csv or the simulate output directory")
    p.add_argument("--report", help="write the metrics as JSON")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("info", help="print the radar constants")
    p.set_defaults(func=_cmd_info)

    p = sub.add_parser("bench", help="time the pipeline on a recording")
    p.add_argument("--config")
    p.add_argument("--input", required=True)
    p.set_defaults(func=_cmd_bench)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "speed", None) is not None and not args.speed > 0:
        print("mmtrack: error: --speed must be positive", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (MMTrackError, OSError) as exc:
        print(f"mmtrack: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
