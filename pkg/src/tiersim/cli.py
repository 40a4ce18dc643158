"""Command line interface: run, validate, summary."""

from __future__ import annotations

import argparse
import sys

from .driver import Simulation
from .metrics import read_export
from .model import InvalidConfig
from .scenario import ScenarioError, parse_scenario


def _cmd_run(args) -> int:
    try:
        scenario = parse_scenario(args.scenario)
    except (ScenarioError, InvalidConfig) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    overrides = {}
    if args.seed is not None:
        from dataclasses import replace

        overrides["machine"] = replace(scenario.machine, rng_seed=args.seed)
    if args.duration is not None:
        overrides["duration"] = args.duration
    if args.out is not None:
        overrides["output_path"] = args.out
    if args.format is not None:
        overrides["output_format"] = args.format
    if overrides:
        scenario = scenario.replace(**overrides)

    summary = Simulation(scenario).run()
    print(f"ran {summary.ticks} ticks, {summary.total_migrations} migrations")
    for cid, (local, cxl) in sorted(summary.placements.items()):
        print(f"  {cid}: local={local} cxl={cxl}")
    if summary.oom_events:
        for event in summary.oom_events:
            print(f"  {event[0]} tick={event[1]} container={event[2]} short={event[3]}")
    if summary.export_path:
        print(f"wrote {summary.export_path}")
    return 0


def _cmd_validate(args) -> int:
    try:
        parse_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 2
    except InvalidConfig as exc:
        for violation in exc.violations:
            print(f"invalid: {violation}", file=sys.stderr)
        return 2
    print("ok")
    return 0


def _cmd_summary(args) -> int:
    try:
        header, snaps = read_export(args.export)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not snaps:
        print("error: export holds no snapshots", file=sys.stderr)
        return 2
    final = snaps[-1]
    print(f"final tick {final['tick']} (seed {header.get('seed')})")
    cols = (
        "container", "local", "cxl", "demoted", "promoted",
        "attempts", "hint_faults", "thrash", "sync", "freed",
    )
    print("  " + "  ".join(f"{c:>11}" for c in cols))
    for cid in sorted(final["containers"]):
        m = final["containers"][cid]
        vals = (
            cid, m["local_pages"], m["cxl_pages"], m["demoted"], m["promoted"],
            m["promotion_attempts"], m["hint_faults"], m["thrash_events"],
            m["sync_demotions"], m["freed"],
        )
        print("  " + "  ".join(f"{v:>11}" for v in vals))
    print(
        f"  system: free_local={final['free_local']} free_cxl={final['free_cxl']}"
        f" watermark={final['watermark_state']}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tiersim",
        description="Deterministic multi-tenant memory tiering simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario file")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", help="export path (overrides the scenario)")
    p_run.add_argument("--format", choices=("csv", "jsonl"), help="export format")
    p_run.add_argument("--seed", type=int, help="override the scenario seed")
    p_run.add_argument("--duration", type=int, help="override the run length in ticks")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="check a scenario file")
    p_val.add_argument("scenario")
    p_val.set_defaults(func=_cmd_validate)

    p_sum = sub.add_parser("summary", help="summarise an export file")
    p_sum.add_argument("export")
    p_sum.set_defaults(func=_cmd_summary)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
