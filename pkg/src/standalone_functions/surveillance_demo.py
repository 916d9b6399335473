#!/usr/bin/env python3
"""
surveillance_demo.py (standalone_functions)

Purpose:
- Demo the simulator WITHOUT a scenario file and WITHOUT InfluxDB.
- Runs the bundled surveillance135 scenario (S2 freed -> S2 saturated -> freed -> saturated)
  and narrates it.

It will:
1) Print every context change and every completed reconfiguration, with the
   overall QoS just before it.
2) Write trace.jsonl, qos.csv and summary.json to <out>/surveillance/.
3) Draw the QoS curve to qos.png next to them.
4) With --open, hand the PNG to the default viewer.

Env vars:
- RECONFIG_OUT_DIR (default "out"); files land in <out>/surveillance/

Usage:
  python3 src/standalone_functions/surveillance_demo.py [--open]
"""

from __future__ import annotations

import argparse
import sys
import webbrowser
from pathlib import Path
from typing import Dict, List

SRC_DIR = Path(__file__).resolve().parents[1]
if str(SRC_DIR) not in sys.path:
    sys.path.insert(0, str(SRC_DIR))

from reconfig_sim.config import default_out_dir
from reconfig_sim.platform_runtime import CONTEXT_EVENT, ORDER_COMPLETED, QOS_SAMPLE, TraceRecord, run_simulation_loop
from reconfig_sim.qos_plot import render_qos_curve_png
from reconfig_sim.reference_scenarios import SURVEILLANCE, generate_reference_scenario
from reconfig_sim.trace_output import summarize_trace, write_run_outputs


def describe_action(action: Dict[str, object]) -> str:
    kind = action["kind"]
    if kind == "replace":
        return f"replace {action['target']} by {action['variant']}"
    if kind == "move":
        return f"move {action['target']} to {action['station']}"
    if kind == "reroute":
        return f"reroute {action['target']} over {'+'.join(action.get('route', [])) or 'local'}"
    return f"{kind} {action['target']}"


def narrate(records: List[TraceRecord]) -> List[str]:
    lines: List[str] = []
    overall_before = None
    phase = "favourable"
    n = 0
    for rec in records:
        p = rec.payload
        if rec.kind == CONTEXT_EVENT:
            if p["action"] == "set_station_load":
                phase = "saturated" if float(p["value"]) > 0 else "favourable"
            lines.append(f"t={rec.at / 1000:5.1f}s  context -> {phase}: {p['action']} {p['target']}={p['value']}")
        elif rec.kind == ORDER_COMPLETED:
            n += 1
            acts = ", ".join(describe_action(a) for a in p["actions"])
            before = f"{overall_before:.3f}" if overall_before is not None else "?"
            lines.append(f"t={rec.at / 1000:5.1f}s  reconfiguration #{n} ({phase}): {acts}  [QoS {before} before]")
        elif rec.kind == QOS_SAMPLE:
            overall_before = float(p["overall"])
    return lines


def main() -> int:
    parser = argparse.ArgumentParser(description="Narrate the surveillance135 run and plot its QoS curve.")
    parser.add_argument("--open", action="store_true", help="Open the PNG once written.")
    args = parser.parse_args()

    scenario = generate_reference_scenario(SURVEILLANCE)
    result = run_simulation_loop(scenario.app, scenario.user, scenario)

    print("\n=== RECONFIGURATION NARRATIVE (surveillance135) ===\n")
    for line in narrate(result.records):
        print(line)

    summary = summarize_trace(result.records)
    print(
        f"\n{summary.reconfigurations} reconfiguration(s), {summary.actions_total} action(s), "
        f"QoS min {summary.min_overall_qos:.3f} / final {summary.final_overall_qos:.3f}"
    )

    out_dir = Path(default_out_dir()) / "surveillance"
    paths = write_run_outputs(result, out_dir, scenario=scenario.name, with_timestamp=False)
    paths["plot"] = render_qos_curve_png(
        [s.to_row() for s in result.samples],
        out_dir / "qos.png",
        order_times=summary.order_times,
        title="surveillance135: QoS while S2 is freed and saturated",
    )
    for name, path in paths.items():
        print(f"  {name:<8} {path}")

    if args.open and not webbrowser.open(paths["plot"].resolve().as_uri()):
        print("No viewer available; open the PNG from the path above.")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
