"""
InfluxDB write helpers for simulation traces.

Measurements (hardcoded names):
  "QoSSample"
    tags:   scenario, policy
    fields: overall, intrinsic, contextual, config_id, in_flight
  "Reconfiguration"
    tags:   scenario, policy
    fields: event_id, config_id, previous, actions, issued_at

Simulated milliseconds are written from a fixed epoch so that pushing the same
run twice overwrites the same points.
"""

from __future__ import annotations

import logging
import os
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, List

from influxdb import InfluxDBClient

from .config import get_bool_env, get_int_env
from .platform_runtime import ORDER_COMPLETED, QOS_SAMPLE, TraceRecord

logger = logging.getLogger(__name__)

INFLUXDB_HOST = os.getenv("INFLUXDB_HOST", "localhost")
INFLUXDB_PORT = get_int_env("INFLUXDB_PORT", 8086)
INFLUXDB_DATABASE = os.getenv("INFLUXDB_DATABASE", "ReconfigSim")
INFLUXDB_USERNAME = os.getenv("INFLUXDB_USERNAME", "") or None
INFLUXDB_PASSWORD = os.getenv("INFLUXDB_PASSWORD", "") or None
INFLUXDB_SSL = get_bool_env("INFLUXDB_SSL", False)

SAMPLE_MEASUREMENT = "QoSSample"
ORDER_MEASUREMENT = "Reconfiguration"
SIM_EPOCH = datetime(2000, 1, 1, tzinfo=timezone.utc)
SIM_EPOCH_MS = int(SIM_EPOCH.timestamp() * 1000)
BATCH_SIZE = 5000


def connect_influx() -> InfluxDBClient:
    client = InfluxDBClient(
        host=INFLUXDB_HOST,
        port=INFLUXDB_PORT,
        username=INFLUXDB_USERNAME,
        password=INFLUXDB_PASSWORD,
        ssl=INFLUXDB_SSL,
        verify_ssl=INFLUXDB_SSL,
        timeout=30,
        retries=3,
    )
    client.switch_database(INFLUXDB_DATABASE)
    return client


def trace_points(records: Iterable[TraceRecord], *, scenario: str, policy: str) -> List[Dict[str, Any]]:
    tags = {"scenario": scenario, "policy": policy}
    points: List[Dict[str, Any]] = []
    for rec in records:
        p = rec.payload
        if rec.kind == QOS_SAMPLE:
            fields: Dict[str, Any] = {
                "overall": float(p["overall"]),
                "intrinsic": float(p["intrinsic"]),
                "contextual": float(p["contextual"]),
                "config_id": str(p["config_id"]),
                "in_flight": int(p["in_flight"]),
            }
            measurement = SAMPLE_MEASUREMENT
        elif rec.kind == ORDER_COMPLETED:
            fields = {
                "event_id": int(p["event_id"]) if p.get("event_id") is not None else -1,
                "config_id": str(p["config_id"]),
                "previous": str(p["previous"]),
                "actions": len(p.get("actions", [])),
                "issued_at": int(p["issued_at"]),
            }
            measurement = ORDER_MEASUREMENT
        else:
            continue
        points.append({
            "measurement": measurement,
            "time": SIM_EPOCH_MS + int(rec.at),
            "tags": dict(tags),
            "fields": fields,
        })
    return points


def push_trace(client: InfluxDBClient, records: Iterable[TraceRecord], *, scenario: str, policy: str) -> int:
    points = trace_points(records, scenario=scenario, policy=policy)
    if points:
        client.write_points(points, time_precision="ms", batch_size=BATCH_SIZE)
    logger.info("pushed %d point(s) for %s/%s", len(points), scenario, policy)
    return len(points)
