"""
trace_output.py

What this file does:
  - Writes a simulation's audit trace as JSON Lines (optional header record first)
  - Writes the per-tick QoS CSV with a fixed column order
  - Recomputes the run summary from trace records alone and writes it as JSON

This file does NOT:
  - Run simulations
  - Talk to InfluxDB (trace_store) or draw anything (qos_plot)

CSV rules:
  - columns: time_ms, overall_qos, intrinsic, contextual, config_id, in_flight
  - time_ms is simulated milliseconds from deployment; one row per tick, t=0 included
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .platform_runtime import (
    EVENT_ENQUEUED,
    EVENT_SELECTED,
    ORDER_COMPLETED,
    ORDER_ISSUED,
    QOS_SAMPLE,
    SEARCH_RESULT,
    SimulationResult,
    TickSample,
    TraceRecord,
)

TRACE_FILE = "trace.jsonl"
SAMPLES_FILE = "qos.csv"
SUMMARY_FILE = "summary.json"
HEADER_KIND = "header"

CSV_COLUMNS = ["time_ms", "overall_qos", "intrinsic", "contextual", "config_id", "in_flight"]


def header_record(
    scenario: str,
    *,
    policy: str,
    seed: int,
    with_timestamp: bool = True,
    now: Optional[datetime] = None,
) -> Dict[str, Any]:
    header: Dict[str, Any] = {"kind": HEADER_KIND, "scenario": scenario, "policy": policy, "seed": seed}
    if with_timestamp:
        ts = now or datetime.now(timezone.utc)
        header["generated_at"] = ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")
    return header


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def write_trace_jsonl(
    records: Iterable[TraceRecord],
    path: Path,
    header: Optional[Mapping[str, Any]] = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        if header is not None:
            f.write(_dumps(dict(header)) + "\n")
        for rec in records:
            f.write(_dumps(rec.to_dict()) + "\n")
    return path


def read_trace_jsonl(path: Path) -> Tuple[Optional[Dict[str, Any]], List[Dict[str, Any]]]:
    """(header or None, trace records as dicts) in file order."""
    header: Optional[Dict[str, Any]] = None
    records: List[Dict[str, Any]] = []
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("kind") == HEADER_KIND and header is None and not records:
                header = obj
                continue
            records.append(obj)
    return header, records


def write_samples_csv(samples: Iterable[TickSample], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        w = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for s in samples:
            w.writerow(s.to_row())
    return path


def read_samples_csv(path: Path) -> List[Dict[str, Any]]:
    rows: List[Dict[str, Any]] = []
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            rows.append({
                "time_ms": int(row["time_ms"]),
                "overall_qos": float(row["overall_qos"]),
                "intrinsic": float(row["intrinsic"]),
                "contextual": float(row["contextual"]),
                "config_id": row["config_id"],
                "in_flight": int(row["in_flight"]),
            })
    return rows


@dataclass(frozen=True)
class TraceSummary:
    reconfigurations: int
    orders_issued: int
    actions_total: int
    actions_by_kind: Dict[str, int]
    stages: Dict[str, int]
    min_overall_qos: Optional[float]
    mean_overall_qos: Optional[float]
    final_overall_qos: Optional[float]
    candidates_evaluated: int
    events_enqueued: int
    events_selected: int
    searches_found: int
    searches_deferred: int
    samples: int
    final_config_id: Optional[str] = None
    order_times: List[int] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _as_dict(rec: Any) -> Mapping[str, Any]:
    return rec.to_dict() if isinstance(rec, TraceRecord) else rec


def summarize_trace(records: Iterable[Any]) -> TraceSummary:
    """Summary of a run, from TraceRecords or their dict form (header records are skipped)."""
    overall: List[float] = []
    actions_by_kind: Dict[str, int] = {}
    stages: Dict[str, int] = {}
    completed = issued = enqueued = selected = found = deferred = candidates = 0
    final_config: Optional[str] = None
    order_times: List[int] = []

    for raw in records:
        rec = _as_dict(raw)
        kind = rec.get("kind")
        payload = rec.get("payload", {})
        if kind == QOS_SAMPLE:
            overall.append(float(payload["overall"]))
            final_config = payload.get("config_id", final_config)
        elif kind == EVENT_ENQUEUED:
            enqueued += 1
        elif kind == EVENT_SELECTED:
            selected += 1
        elif kind == SEARCH_RESULT:
            candidates += int(payload.get("candidates_evaluated", 0))
            if payload.get("found"):
                found += 1
                stage = str(payload.get("stage", ""))
                stages[stage] = stages.get(stage, 0) + 1
            else:
                deferred += 1
        elif kind == ORDER_ISSUED:
            issued += 1
        elif kind == ORDER_COMPLETED:
            completed += 1
            order_times.append(int(rec["at"]))
            final_config = payload.get("config_id", final_config)
            for action in payload.get("actions", []):
                k = str(action["kind"])
                actions_by_kind[k] = actions_by_kind.get(k, 0) + 1

    return TraceSummary(
        reconfigurations=completed,
        orders_issued=issued,
        actions_total=sum(actions_by_kind.values()),
        actions_by_kind=dict(sorted(actions_by_kind.items())),
        stages=dict(sorted(stages.items())),
        min_overall_qos=min(overall) if overall else None,
        mean_overall_qos=sum(overall) / len(overall) if overall else None,
        final_overall_qos=overall[-1] if overall else None,
        candidates_evaluated=candidates,
        events_enqueued=enqueued,
        events_selected=selected,
        searches_found=found,
        searches_deferred=deferred,
        samples=len(overall),
        final_config_id=final_config,
        order_times=order_times,
    )


def write_summary_json(summary: TraceSummary, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_run_outputs(
    result: SimulationResult,
    out_dir: Path,
    *,
    scenario: str,
    with_timestamp: bool = True,
) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    header = header_record(scenario, policy=result.policy, seed=result.params.seed, with_timestamp=with_timestamp)
    return {
        "trace": write_trace_jsonl(result.records, out_dir / TRACE_FILE, header),
        "samples": write_samples_csv(result.samples, out_dir / SAMPLES_FILE),
        "summary": write_summary_json(summarize_trace(result.records), out_dir / SUMMARY_FILE),
    }


def completed_orders(records: Sequence[Any]) -> List[Mapping[str, Any]]:
    return [_as_dict(r) for r in records if _as_dict(r).get("kind") == ORDER_COMPLETED]
