"""
config.py

What this file does:
  - Loads .env once (python-dotenv) and reads RECONFIG_* overrides
  - Defines SimulationParams, the single bag of tunables shared by the
    engine, the event manager, the search and the runtime loop

This file does NOT:
  - Parse scenario files (scenario_io merges their "parameters" block on top)

Precedence: CLI flag > scenario parameters > env var > built-in default.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Mapping, Optional

try:
    from dotenv import load_dotenv
    load_dotenv()
except Exception:
    pass


def get_int_env(name: str, default: int) -> int:
    raw = (os.getenv(name, "") or "").strip()
    if not raw:
        return default
    try:
        v = int(raw)
        return v if v > 0 else default
    except ValueError:
        return default


def get_float_env(name: str, default: float) -> float:
    raw = (os.getenv(name, "") or "").strip()
    if not raw:
        return default
    try:
        v = float(raw)
        return v if v >= 0 else default
    except ValueError:
        return default


def get_bool_env(name: str, default: bool = False) -> bool:
    raw = (os.getenv(name, "") or "").strip().lower()
    if not raw:
        return default
    return raw in ("1", "true", "yes", "y")


@dataclass(frozen=True)
class SimulationParams:
    eps_intrinsic: float = 0.05
    eps_contextual: float = 0.05
    delta: float = 0.01
    event_threshold: float = 0.1
    # per measurement point override, keyed by conduct id or "slot.port"
    point_thresholds: Dict[str, float] = field(default_factory=dict)
    dt_ms: int = 100
    action_latency_ms: int = 200
    horizon_ms: int = 10_000
    seed: int = 0
    k_adjacent: int = 2
    brute_force_cap: int = 1_000_000
    stage_budget: Optional[int] = None
    ring_radius: Optional[int] = None

    def threshold_for(self, point: str) -> float:
        return self.point_thresholds.get(point, self.event_threshold)

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["point_thresholds"] = dict(sorted(self.point_thresholds.items()))
        return d

    def with_overrides(self, values: Mapping[str, Any]) -> "SimulationParams":
        known = {f.name for f in fields(self)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise KeyError(f"unknown parameter(s): {', '.join(unknown)}")
        return replace(self, **dict(values))


def default_params() -> SimulationParams:
    """Built-in defaults with RECONFIG_* environment overrides applied."""
    base = SimulationParams()
    return replace(
        base,
        eps_intrinsic=get_float_env("RECONFIG_EPS_INTRINSIC", base.eps_intrinsic),
        eps_contextual=get_float_env("RECONFIG_EPS_CONTEXTUAL", base.eps_contextual),
        delta=get_float_env("RECONFIG_DELTA", base.delta),
        event_threshold=get_float_env("RECONFIG_EVENT_THRESHOLD", base.event_threshold),
        dt_ms=get_int_env("RECONFIG_DT_MS", base.dt_ms),
        action_latency_ms=get_int_env("RECONFIG_ACTION_LATENCY_MS", base.action_latency_ms),
        k_adjacent=get_int_env("RECONFIG_K_ADJACENT", base.k_adjacent),
        brute_force_cap=get_int_env("RECONFIG_BRUTE_FORCE_CAP", base.brute_force_cap),
    )


def default_out_dir() -> str:
    return (os.getenv("RECONFIG_OUT_DIR", "") or "").strip() or "out"


def default_log_level() -> str:
    return (os.getenv("RECONFIG_LOG_LEVEL", "") or "").strip().upper() or "WARNING"
