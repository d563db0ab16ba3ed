"""Command-line entry point: validate, optimize, report, correlate, synth."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from smartcharge.config import SCENARIO_CHOICES, RunConfig, SynthParams
from smartcharge.errors import SmartChargeError
from smartcharge.formats import dump_json, load_catalog, load_hourly_moer, load_sessions, load_tariffs
from smartcharge.moer import correlate_rate_moer
from smartcharge.pipeline import EXIT_FATAL, EXIT_OK, EXIT_PARTIAL, rereport, run_pipeline
from smartcharge.synth import generate_synthetic_fleet
from smartcharge.tariff import billing_tariff

log = logging.getLogger("smartcharge")


def _config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for name in ("sessions", "tariffs", "moer", "catalog"):
        value = getattr(args, name, None)
        if value:
            setattr(cfg, name, value)
    if args.out:
        cfg.out_dir = args.out
    if args.scenario:
        cfg.scenario = args.scenario
    if args.slot_len:
        cfg.slot_len_minutes = args.slot_len
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.__post_init__()
    return cfg


def cmd_validate(args) -> int:
    cfg = _config(args)
    catalog = load_catalog(cfg.catalog)
    tariffs = load_tariffs(cfg.tariffs, catalog)
    for u in catalog.utilities.values():
        billing_tariff(u, "baseline", tariffs)
        billing_tariff(u, "optimized", tariffs)
    hourly = load_hourly_moer(cfg.moer)
    load = load_sessions(cfg.sessions, catalog)
    doc = {
        "utilities": len(catalog.utilities),
        "regions": len(catalog.regions),
        "tariffs": len(tariffs),
        "moer_regions": {rid: {"hours": int(h.hours.size), "partial_hours": int(h.partial.sum())}
                         for rid, h in sorted(hourly.items())},
        "rows_read": load.rows_read,
        "rows_loaded": load.rows_loaded,
        "windows": len(load.windows),
        "rejects": [asdict(r) for r in load.rejects],
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_PARTIAL if load.rejects else EXIT_OK


def cmd_optimize(args) -> int:
    cfg = _config(args)
    if args.workers:
        cfg.workers = args.workers
    result = run_pipeline(cfg)
    for name, path in result.files.items():
        print(f"{name}: {path}")
    dq = result.data_quality
    print(f"windows evaluated: {dq['windows_evaluated']}, skipped: {dq['windows_skipped']}, "
          f"rows rejected: {dq['rows_rejected']}")
    return result.exit_code


def cmd_report(args) -> int:
    cfg = _config(args)
    outcomes = args.outcomes or str(Path(cfg.out_dir) / "outcomes.csv")
    print(rereport(cfg, outcomes))
    return EXIT_OK


def cmd_correlate(args) -> int:
    cfg = _config(args)
    catalog = load_catalog(cfg.catalog)
    tariffs = load_tariffs(cfg.tariffs, catalog)
    hourly = load_hourly_moer(cfg.moer)
    year, month = (int(x) for x in args.month.split("-"))
    rows = []
    for u in sorted(catalog.utilities.values(), key=lambda u: u.id):
        tariff = billing_tariff(u, "optimized", tariffs)
        for rid in args.region or sorted(hourly):
            try:
                r = correlate_rate_moer(tariff, hourly[rid], year, month, pairwise=args.pairwise)
                rows.append({"utility_id": u.id, "tariff_id": tariff.tariff_id, "region_id": rid,
                             "correlation": r})
            except SmartChargeError as exc:
                rows.append({"utility_id": u.id, "tariff_id": tariff.tariff_id, "region_id": rid,
                             "error": type(exc).__name__})
    doc = {"month": args.month, "estimator": "pearson",
           "profile": "month-hour pairs" if args.pairwise else "hour-of-day means", "results": rows}
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        dump_json(Path(args.out) / f"correlation_{args.month}.json", doc)
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.params:
        params = SynthParams(**json.loads(Path(args.params).read_text()))
    else:
        params = SynthParams()
    if args.vehicles:
        params.vehicles = args.vehicles
    if args.seed is not None:
        params.seed = args.seed
    params.__post_init__()
    fleet = generate_synthetic_fleet(params)
    out = args.out or "synthetic"
    paths = fleet.write(out)
    for name, p in paths.items():
        print(f"{name}: {p}")
    print(f"windows: {len(fleet.windows)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--scenario", choices=SCENARIO_CHOICES)
    common.add_argument("--slot-len", type=float, help="slot length in minutes (must divide 60)")
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")
    inputs = argparse.ArgumentParser(add_help=False)
    for name in ("sessions", "tariffs", "moer", "catalog"):
        inputs.add_argument(f"--{name}", help=f"{name} file (overrides config)")

    parser = argparse.ArgumentParser(prog="smartcharge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common, inputs], help="check input files")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("optimize", parents=[common, inputs], help="run the full pipeline")
    p.add_argument("--workers", type=int, help="processes for per-vehicle optimization")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("report", parents=[common, inputs], help="re-aggregate an outcomes table")
    p.add_argument("--outcomes", help="outcomes.csv (default: <out>/outcomes.csv)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("correlate", parents=[common, inputs], help="tariff price vs MOER correlation")
    p.add_argument("--month", required=True, help="YYYY-MM")
    p.add_argument("--region", action="append", help="restrict to region id (repeatable)")
    p.add_argument("--pairwise", action="store_true", help="correlate month-hour pairs, not hour-of-day means")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic fleet")
    p.add_argument("--params", help="JSON file of generator parameters")
    p.add_argument("--vehicles", type=int)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SmartChargeError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
