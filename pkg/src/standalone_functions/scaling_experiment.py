#!/usr/bin/env python3
"""
scaling_experiment.py (standalone_functions)

Purpose:
- Check that the search stays polynomial: run scaling(n,v,s) fixtures with
  n*v*s from about 10 to about 10^4, record the largest per-event
  candidates_evaluated, and fit the log-log slope against n*v*s.

Env vars:
- SCALING_SEED (default 0) seeds station capacities

Run (host python):
  python3 src/standalone_functions/scaling_experiment.py
Exit code 0 when slope <= 2.2 and the c*(n*v*s)^2 bound holds, else 1.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

THIS_FILE = Path(__file__).resolve()
SRC_DIR = THIS_FILE.parents[1]

if str(SRC_DIR) not in sys.path:
    sys.path.insert(0, str(SRC_DIR))

from reconfig_sim.experiments import loglog_slope, measure_scaling, quadratic_bound_holds

MAX_SLOPE = 2.2


def main() -> int:
    seed = int((os.getenv("SCALING_SEED", "") or "0").strip() or 0)
    points = measure_scaling(seed=seed)

    print(f"{'n':>3} {'v':>3} {'s':>3} {'n*v*s':>7} {'searches':>9} {'max cand.':>10}")
    for p in points:
        print(f"{p.n:>3} {p.v:>3} {p.s:>3} {p.size:>7} {p.searches:>9} {p.max_candidates:>10}")

    slope = loglog_slope([p.size for p in points], [p.max_candidates for p in points])
    bound = quadratic_bound_holds(points)
    print(f"\nlog-log slope: {slope:.3f} (limit {MAX_SLOPE})")
    print("c*(n*v*s)^2 bound:", "holds" if bound else "VIOLATED")
    return 0 if slope <= MAX_SLOPE and bound else 1


if __name__ == "__main__":
    raise SystemExit(main())
