#!/usr/bin/env python3
"""
Command-line entry point of the reconfiguration simulator.

Commands:
- run <scenario.json>   simulate; writes trace.jsonl, qos.csv and summary.json to --out
- validate <scenario>   parse and check a scenario, print its configuration count
- gen <name>            write a bundled scenario (surveillance135, surveillance135-oscillating,
                        toy6, scaling, scaling(n,v,s), videoconf-language)
- summary <trace.jsonl> recompute and print the summary of a trace
- plot <qos.csv>        draw the QoS curve to a PNG

Env vars:
- RECONFIG_OUT_DIR (default "out")
- RECONFIG_LOG_LEVEL (default WARNING; --verbose forces DEBUG)
- RECONFIG_* parameter overrides, see reconfig_sim/config.py
- INFLUXDB_* connection settings for --influx

Exit codes: 0 ok, 2 unreadable or invalid input, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import List, Optional

from reconfig_sim.app_model import enumerate_configurations, placement_space_size
from reconfig_sim.config import default_log_level, default_out_dir
from reconfig_sim.errors import InvalidDefaultConfiguration, ReconfigError, ScenarioError, UnknownName
from reconfig_sim.platform_runtime import EXHAUSTIVE, HEURISTIC, run_simulation_loop
from reconfig_sim.reference_scenarios import generate_reference_scenario
from reconfig_sim.scenario_io import load_scenario, serialize_scenario
from reconfig_sim.trace_output import (
    completed_orders,
    read_samples_csv,
    read_trace_jsonl,
    summarize_trace,
    write_run_outputs,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INPUT = 2


def log(msg: str, *, err: bool = False) -> None:
    ts = datetime.now().strftime("%H:%M:%S")
    print(f"[reconfig-sim {ts}] {msg}", file=sys.stderr if err else sys.stdout, flush=True)


def _configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else getattr(logging, default_log_level(), logging.WARNING)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(Path(args.scenario))
    except OSError as e:
        log(f"ERROR: cannot read scenario '{args.scenario}': {e}", err=True)
        return EXIT_INPUT
    except ScenarioError as e:
        log(f"ERROR: invalid scenario '{args.scenario}': {e}", err=True)
        return EXIT_INPUT

    params = scenario.params
    if args.seed is not None:
        params = params.with_overrides({"seed": args.seed})

    log(f"Running {scenario.name} policy={args.policy} horizon={params.horizon_ms}ms dt={params.dt_ms}ms")
    try:
        result = run_simulation_loop(scenario.app, scenario.user, scenario, policy=args.policy, params=params)
    except InvalidDefaultConfiguration as e:
        log(f"ERROR: {e}", err=True)
        return EXIT_INPUT
    except ReconfigError as e:
        log(f"ERROR: simulation failed: {e}", err=True)
        return EXIT_RUNTIME

    out_dir = Path(args.out or default_out_dir())
    try:
        paths = write_run_outputs(result, out_dir, scenario=scenario.name, with_timestamp=not args.no_header_timestamp)
    except OSError as e:
        log(f"ERROR: cannot write outputs to '{out_dir}': {e}", err=True)
        return EXIT_RUNTIME

    summary = summarize_trace(result.records)
    log(
        f"Done: {summary.reconfigurations} reconfiguration(s), {summary.actions_total} action(s), "
        f"final QoS {summary.final_overall_qos:.4f}"
    )
    for name, path in paths.items():
        log(f"  Wrote {name}: {path}")

    if args.influx:
        from reconfig_sim.trace_store import connect_influx, push_trace

        try:
            n = push_trace(connect_influx(), result.records, scenario=scenario.name, policy=args.policy)
        except Exception as e:
            log(f"ERROR: InfluxDB push failed: {e}", err=True)
            return EXIT_RUNTIME
        log(f"  Pushed {n} point(s) to InfluxDB")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(Path(args.scenario))
    except OSError as e:
        log(f"ERROR: cannot read scenario '{args.scenario}': {e}", err=True)
        return EXIT_INPUT
    except ScenarioError as e:
        log(f"ERROR: {e}", err=True)
        return EXIT_INPUT

    size = placement_space_size(scenario.app)
    if size <= scenario.params.brute_force_cap:
        count = str(sum(1 for _ in enumerate_configurations(scenario.app)))
    else:
        count = f"> {scenario.params.brute_force_cap}"
    print(f"ok: {scenario.name} ({len(scenario.app.slots)} slots, {len(scenario.app.stations)} stations, "
          f"{count} configurations)")
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    try:
        scenario = generate_reference_scenario(args.name, seed=args.seed or 0)
    except UnknownName as e:
        log(f"ERROR: {e}", err=True)
        return EXIT_INPUT
    text = serialize_scenario(scenario)
    if not args.out:
        sys.stdout.write(text)
        return EXIT_OK
    try:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
    except OSError as e:
        log(f"ERROR: cannot write '{args.out}': {e}", err=True)
        return EXIT_RUNTIME
    log(f"Wrote {args.name} to {out}")
    return EXIT_OK


def cmd_summary(args: argparse.Namespace) -> int:
    try:
        _, records = read_trace_jsonl(Path(args.trace))
    except OSError as e:
        log(f"ERROR: cannot read trace '{args.trace}': {e}", err=True)
        return EXIT_INPUT
    except json.JSONDecodeError as e:
        log(f"ERROR: malformed trace '{args.trace}': {e}", err=True)
        return EXIT_INPUT
    print(json.dumps(summarize_trace(records).to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    from reconfig_sim.qos_plot import render_qos_curve_png

    try:
        rows = read_samples_csv(Path(args.csv))
        order_times: List[int] = []
        if args.trace:
            _, records = read_trace_jsonl(Path(args.trace))
            order_times = [int(r["at"]) for r in completed_orders(records)]
    except (OSError, KeyError, ValueError) as e:
        log(f"ERROR: cannot read plot inputs: {e}", err=True)
        return EXIT_INPUT
    if not rows:
        log(f"ERROR: '{args.csv}' has no samples", err=True)
        return EXIT_INPUT
    out = Path(args.out) if args.out else Path(args.csv).with_suffix(".png")
    render_qos_curve_png(rows, out, order_times=order_times, title=args.title)
    log(f"Wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simulator_cli", description="QoS-driven reconfiguration simulator")
    parser.add_argument("--verbose", action="store_true", help="Debug logging.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="Run a scenario file.")
    p.add_argument("scenario")
    p.add_argument("--out", default=None, help="Output directory (default RECONFIG_OUT_DIR or ./out).")
    p.add_argument("--policy", choices=[HEURISTIC, EXHAUSTIVE], default=HEURISTIC)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-header-timestamp", action="store_true", help="Omit generated_at from the trace header.")
    p.add_argument("--influx", action="store_true", help="Also push samples and orders to InfluxDB.")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="Parse and check a scenario file.")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen", help="Write a bundled scenario.")
    p.add_argument("name")
    p.add_argument("--out", default=None, help="Target file (default stdout).")
    p.add_argument("--seed", type=int, default=None, help="Seed for scaling(n,v,s) capacities.")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("summary", help="Summarize a trace file.")
    p.add_argument("trace")
    p.set_defaults(func=cmd_summary)

    p = sub.add_parser("plot", help="Plot a per-tick QoS CSV.")
    p.add_argument("csv")
    p.add_argument("--trace", default=None, help="Trace file; completed orders are marked.")
    p.add_argument("--out", default=None, help="PNG path (default: next to the CSV).")
    p.add_argument("--title", default="Application QoS")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
