"""
experiments.py

What this file does:
  - Measures per-event search cost (candidates evaluated) over scaling(n,v,s) fixtures
  - Fits the log-log growth slope of that cost against n*v*s with numpy
  - Counts committed actions per policy on a scenario (plasticity comparison)

This file does NOT:
  - Print or write anything; the standalone scripts do
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .platform_runtime import SEARCH_RESULT, run_simulation_loop
from .reference_scenarios import generate_reference_scenario
from .scenario_io import ScenarioFile
from .trace_output import summarize_trace

logger = logging.getLogger(__name__)

DEFAULT_SCALING_GRID: Tuple[Tuple[int, int, int], ...] = (
    (2, 3, 2),
    (3, 4, 3),
    (4, 5, 5),
    (6, 8, 6),
    (10, 10, 10),
    (20, 20, 25),
)


@dataclass(frozen=True)
class ScalingPoint:
    n: int
    v: int
    s: int
    searches: int
    max_candidates: int
    total_candidates: int

    @property
    def size(self) -> int:
        return self.n * self.v * self.s


def search_costs(scenario: ScenarioFile) -> List[int]:
    """candidates_evaluated of every search the run performed, in trace order."""
    result = run_simulation_loop(scenario.app, scenario.user, scenario)
    return [int(r.payload["candidates_evaluated"]) for r in result.records if r.kind == SEARCH_RESULT]


def measure_scaling(grid: Sequence[Tuple[int, int, int]] = DEFAULT_SCALING_GRID, seed: int = 0) -> List[ScalingPoint]:
    points: List[ScalingPoint] = []
    for n, v, s in grid:
        costs = search_costs(generate_reference_scenario(f"scaling({n},{v},{s})", seed=seed))
        points.append(ScalingPoint(
            n=n, v=v, s=s,
            searches=len(costs),
            max_candidates=max(costs) if costs else 0,
            total_candidates=sum(costs),
        ))
        logger.info("scaling(%d,%d,%d): %d search(es), max %d candidates", n, v, s, len(costs), points[-1].max_candidates)
    return points


def loglog_slope(sizes: Sequence[float], costs: Sequence[float]) -> float:
    if len(sizes) < 2:
        raise ValueError("need at least two points for a slope")
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.log(np.maximum(np.asarray(costs, dtype=float), 1.0))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def quadratic_bound_holds(points: Sequence[ScalingPoint]) -> bool:
    """Every point's cost stays under c*(n*v*s)^2, c taken from the smallest fixture."""
    ordered = sorted(points, key=lambda p: p.size)
    c = max(ordered[0].max_candidates, 1) / ordered[0].size ** 2
    return all(p.max_candidates <= c * p.size ** 2 + 1e-9 for p in ordered)


def actions_by_policy(scenario: ScenarioFile, policies: Sequence[str]) -> Dict[str, int]:
    out: Dict[str, int] = {}
    for policy in policies:
        result = run_simulation_loop(scenario.app, scenario.user, scenario, policy=policy)
        out[policy] = summarize_trace(result.records).actions_total
    return out
