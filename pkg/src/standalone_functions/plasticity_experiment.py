#!/usr/bin/env python3
"""
plasticity_experiment.py (standalone_functions)

Purpose:
- Compare the family-based heuristic with the exhaustive policy on the
  oscillating surveillance scenario (eight free / saturate alternations of S2).

It prints, per policy: completed reconfigurations, committed actions by kind,
and mean overall QoS. The heuristic is expected to commit fewer actions.

Run (host python):
  python3 src/standalone_functions/plasticity_experiment.py
Exit code 0 when heuristic actions < exhaustive actions, else 1.
"""

from __future__ import annotations

import sys
from pathlib import Path

THIS_FILE = Path(__file__).resolve()
SRC_DIR = THIS_FILE.parents[1]

if str(SRC_DIR) not in sys.path:
    sys.path.insert(0, str(SRC_DIR))

from reconfig_sim.platform_runtime import EXHAUSTIVE, HEURISTIC, run_simulation_loop
from reconfig_sim.reference_scenarios import SURVEILLANCE_OSCILLATING, generate_reference_scenario
from reconfig_sim.trace_output import TraceSummary, summarize_trace


def run_policy(policy: str) -> TraceSummary:
    scenario = generate_reference_scenario(SURVEILLANCE_OSCILLATING)
    result = run_simulation_loop(scenario.app, scenario.user, scenario, policy=policy)
    return summarize_trace(result.records)


def main() -> int:
    results = {policy: run_policy(policy) for policy in (HEURISTIC, EXHAUSTIVE)}

    print(f"{'policy':<12} {'orders':>7} {'actions':>8} {'mean QoS':>9}  actions by kind")
    for policy, s in results.items():
        kinds = ", ".join(f"{k}={v}" for k, v in s.actions_by_kind.items()) or "-"
        print(f"{policy:<12} {s.reconfigurations:>7} {s.actions_total:>8} {s.mean_overall_qos:>9.4f}  {kinds}")

    ok = results[HEURISTIC].actions_total < results[EXHAUSTIVE].actions_total
    print("\nheuristic commits fewer actions:", "yes" if ok else "NO")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
