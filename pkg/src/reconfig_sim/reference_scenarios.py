"""
reference_scenarios.py

What this file does:
  - Builds the bundled scenarios as JSON-shaped documents and parses them
    through scenario_io, so they obey exactly the rules of a file on disk
  - surveillance135: capture -> compression -> processing -> display over three
    stations, 135 configurations, favourable / saturated / favourable / saturated script
  - surveillance135-oscillating: same application, eight alternations
  - toy6: two slots on one station, six configurations, hand-checkable argmax
  - scaling(n,v,s): chain of n slots, v variants each, s fully meshed stations
  - videoconf-language: a spy agent watching the spoken language

This file does NOT:
  - Write files (the CLI `gen` command serializes what this returns)

surveillance135 derivation (frame_rate wish: 5 fps -> 0, 25 fps -> 1):
  - S2 starts loaded (base_load 4, capacity 8); compression_v2 + processing_v4
    demand 6, so both run at 8/10 and the flow leaves processing at 16 fps
  - at 1 s S2 is freed: processing is replaced by v5 (adjacent family 0.94),
    then compression by v3 (family 1.0); S2 is exactly full (demand 8)
  - at 3 s S2 is loaded to 8: processing moves off S2 (same family, 0.22 -> 0.66),
    then compression moves off S2 (QoS back to 1.0 on another configuration)
  - later alternations leave the running configuration untouched
"""

from __future__ import annotations

import random
import re
from typing import Any, Dict, List, Optional, Tuple

from .config import SimulationParams
from .errors import UnknownName
from .scenario_io import ScenarioFile, parse_document

SURVEILLANCE = "surveillance135"
SURVEILLANCE_OSCILLATING = "surveillance135-oscillating"
TOY6 = "toy6"
SCALING = "scaling"
VIDEOCONF = "videoconf-language"
REFERENCE_NAMES = (SURVEILLANCE, SURVEILLANCE_OSCILLATING, TOY6, SCALING, VIDEOCONF)

_SCALING_RE = re.compile(r"^scaling\((\d+),(\d+),(\d+)\)$")

FRAME_RATE_WISH = {"characteristic": "frame_rate", "breakpoints": [[5.0, 0.0], [25.0, 1.0]], "weight": 1.0}
SCALED = {"a": 1.0, "b": 0.0, "lo": 0.0, "hi": 1000.0, "scaled": True}


def _unit_wish(characteristic: str, weight: float = 1.0) -> Dict[str, Any]:
    return {"characteristic": characteristic, "breakpoints": [[0.0, 0.0], [1.0, 1.0]], "weight": weight}


def _frame_rate_transfer() -> Dict[str, Any]:
    return {"out": {"frame_rate": dict(SCALED)}}


def _mesh_links(stations: List[str], bandwidth: float, latency: float) -> List[Dict[str, Any]]:
    links = []
    for i, a in enumerate(stations):
        for b in stations[i + 1:]:
            links.append({
                "id": f"L_{a}_{b}",
                "endpoints": [a, b],
                "bandwidth": bandwidth,
                "latency": latency,
            })
    return links


# ---------------------------------------------------------------------------
# surveillance135
# ---------------------------------------------------------------------------
def _surveillance_document(load_script: List[Tuple[int, float]], horizon_ms: int, name: str) -> Dict[str, Any]:
    compression = [
        {
            "id": f"compression_v{i}",
            "power_rank": i,
            "cpu_demand": float(i),
            "description": f"compression level {i}",
            "intrinsic_contribution": {"image_quality": q},
            "transfer": _frame_rate_transfer(),
        }
        for i, q in ((1, 0.76), (2, 0.88), (3, 1.0))
    ]
    processing = [
        {
            "id": f"processing_v{i}",
            "power_rank": i,
            "cpu_demand": float(i),
            "description": f"picture analysis level {i}",
            "intrinsic_contribution": {"analysis_quality": q},
            "transfer": _frame_rate_transfer(),
        }
        for i, q in ((1, 0.52), (2, 0.64), (3, 0.76), (4, 0.88), (5, 1.0))
    ]
    return {
        "name": name,
        "description": "video surveillance: capture, compression, picture processing, display",
        "application": {
            "name": "video-surveillance",
            "characteristics": [
                {"id": "image_quality", "kind": "intrinsic", "unit": "", "description": "compressed picture quality"},
                {"id": "analysis_quality", "kind": "intrinsic", "unit": "", "description": "picture analysis depth"},
                {"id": "frame_rate", "kind": "contextual", "unit": "frames/s", "description": "delivered frame rate"},
                {"id": "bitrate", "kind": "contextual", "unit": "kbit/s", "flow_role": "bitrate"},
                {"id": "delay", "kind": "contextual", "unit": "ms", "higher_is_better": False, "flow_role": "delay"},
            ],
            "groups": [{
                "id": "surveillance",
                "subgroups": [
                    {
                        "id": "acquisition",
                        "characteristics": ["image_quality", "frame_rate"],
                        "slots": [
                            {
                                "id": "capture",
                                "admissible_stations": ["S1"],
                                "input_ports": [],
                                "variants": [{"id": "camera", "power_rank": 1, "cpu_demand": 1.0}],
                            },
                            {"id": "compression", "variants": compression},
                        ],
                        "conducts": [
                            {"id": "k1", "source": "capture.out", "sink": "compression.in"},
                            {"id": "k2", "source": "compression.out", "sink": "processing.in"},
                        ],
                    },
                    {
                        "id": "analysis",
                        "characteristics": ["analysis_quality", "frame_rate"],
                        "slots": [
                            {"id": "processing", "variants": processing},
                            {
                                "id": "display",
                                "admissible_stations": ["S3"],
                                "variants": [{"id": "monitor", "power_rank": 1, "cpu_demand": 1.0}],
                            },
                        ],
                        "conducts": [
                            {"id": "k3", "source": "processing.out", "sink": "display.in"},
                        ],
                    },
                ],
            }],
            "stations": [
                {"id": "S1", "capacity": 6.0, "base_load": 0.0},
                {"id": "S2", "capacity": 8.0, "base_load": 4.0},
                {"id": "S3", "capacity": 6.0, "base_load": 0.0},
            ],
            "links": [
                {"id": "L12", "endpoints": ["S1", "S2"], "bandwidth": 10000.0, "latency": 10.0},
                {"id": "L13", "endpoints": ["S1", "S3"], "bandwidth": 10000.0, "latency": 10.0},
                {"id": "L23", "endpoints": ["S2", "S3"], "bandwidth": 10000.0, "latency": 10.0},
            ],
            "source_values": {"frame_rate": 25.0, "bitrate": 8000.0, "delay": 0.0},
        },
        "user": {
            "wishes": [FRAME_RATE_WISH, _unit_wish("image_quality"), _unit_wish("analysis_quality")],
            "subgroup_weights": {"acquisition": 1.0, "analysis": 1.0},
            "group_weights": {"surveillance": 1.0},
        },
        "default_configuration": {
            "placement": {
                "capture": {"variant": "camera", "station": "S1"},
                "compression": {"variant": "compression_v2", "station": "S2"},
                "processing": {"variant": "processing_v4", "station": "S2"},
                "display": {"variant": "monitor", "station": "S3"},
            },
        },
        "context_events": [
            {"at": at, "action": "set_station_load", "target": "S2", "value": load}
            for at, load in load_script
        ],
        "parameters": {"horizon_ms": horizon_ms},
    }


def _alternations(count: int, start: int = 1000, period: int = 2000) -> List[Tuple[int, float]]:
    # even steps free S2 (favourable), odd steps saturate it
    return [(start + i * period, 0.0 if i % 2 == 0 else 8.0) for i in range(count)]


def surveillance_document(oscillating: bool = False) -> Dict[str, Any]:
    if oscillating:
        script = _alternations(8)
        return _surveillance_document(script, script[-1][0] + 2000, SURVEILLANCE_OSCILLATING)
    return _surveillance_document(_alternations(4), 9000, SURVEILLANCE)


# ---------------------------------------------------------------------------
# toy6
# ---------------------------------------------------------------------------
def toy6_document() -> Dict[str, Any]:
    def variant(vid: str, rank: int, quality: float, demand: float) -> Dict[str, Any]:
        return {
            "id": vid,
            "power_rank": rank,
            "cpu_demand": demand,
            "intrinsic_contribution": {"quality": quality},
            "transfer": _frame_rate_transfer(),
        }

    return {
        "name": TOY6,
        "description": "two slots on one station, six configurations",
        "application": {
            "name": TOY6,
            "characteristics": [
                {"id": "quality", "kind": "intrinsic"},
                {"id": "frame_rate", "kind": "contextual", "unit": "frames/s"},
            ],
            "groups": [{
                "id": "g",
                "subgroups": [{
                    "id": "sg",
                    "characteristics": ["quality", "frame_rate"],
                    "slots": [
                        {"id": "a", "variants": [variant("a1", 1, 0.6, 1.0), variant("a2", 2, 0.9, 4.0)]},
                        {"id": "b", "variants": [
                            variant("b1", 1, 0.5, 1.0), variant("b2", 3, 0.8, 5.0), variant("b3", 2, 0.7, 2.0),
                        ]},
                    ],
                    "conducts": [{"id": "ab", "source": "a.out", "sink": "b.in"}],
                }],
            }],
            "stations": [{"id": "host", "capacity": 8.0}],
            "links": [],
            "source_values": {"frame_rate": 25.0},
        },
        "user": {"wishes": [FRAME_RATE_WISH, _unit_wish("quality")]},
        "default_configuration": {
            "placement": {
                "a": {"variant": "a1", "station": "host"},
                "b": {"variant": "b1", "station": "host"},
            },
        },
        "parameters": {"horizon_ms": 1000},
    }


# ---------------------------------------------------------------------------
# scaling(n, v, s)
# ---------------------------------------------------------------------------
def scaling_document(n: int, v: int, s: int, seed: int = 0) -> Dict[str, Any]:
    """
    Chain p0 -> p1 -> ... of n slots, each in its own sub-group, v variants per slot
    (intrinsic marks equally spaced up to 1.0, demand j + 1) and s stations in a full
    mesh, every capacity large enough for the whole chain. At 1 s the station
    hosting p0 is saturated, which a single move of p0 repairs.
    """
    if n < 1 or v < 1 or s < 1:
        raise ValueError(f"scaling({n},{v},{s}): every dimension must be >= 1")
    rng = random.Random(seed)
    stations = [f"S{i}" for i in range(s)]
    full_chain = float(n * v)
    capacities = {st: round(rng.uniform(full_chain + v, 2 * full_chain + v), 3) for st in stations}
    base_loads = {st: round(rng.uniform(0.0, 0.5 * v), 3) for st in stations}

    subgroups = []
    placement = {}
    for i in range(n):
        slot = f"p{i}"
        variants = []
        for j in range(v):
            mark = 1.0 if v == 1 else round(0.5 + 0.5 * j / (v - 1), 12)
            variants.append({
                "id": f"{slot}_v{j}",
                "power_rank": j,
                "cpu_demand": float(j + 1),
                "intrinsic_contribution": {"quality": mark},
                "transfer": _frame_rate_transfer(),
            })
        conducts = []
        if i + 1 < n:
            conducts.append({"id": f"c{i}", "source": f"{slot}.out", "sink": f"p{i + 1}.in"})
        subgroups.append({
            "id": f"stage{i}",
            "characteristics": ["quality", "frame_rate"],
            "slots": [{"id": slot, "variants": variants}],
            "conducts": conducts,
        })
        host = stations[0] if i == 0 or s == 1 else stations[1 + (i - 1) % (s - 1)]
        placement[slot] = {"variant": f"{slot}_v{v - 1}", "station": host}

    return {
        "name": f"scaling({n},{v},{s})",
        "description": f"chain of {n} slots, {v} variants, {s} stations",
        "application": {
            "name": f"scaling-{n}-{v}-{s}",
            "characteristics": [
                {"id": "quality", "kind": "intrinsic"},
                {"id": "frame_rate", "kind": "contextual", "unit": "frames/s"},
            ],
            "groups": [{"id": "chain", "subgroups": subgroups}],
            "stations": [
                {"id": st, "capacity": capacities[st], "base_load": base_loads[st]} for st in stations
            ],
            "links": _mesh_links(stations, 10000.0, 5.0),
            "source_values": {"frame_rate": 25.0},
        },
        "user": {"wishes": [FRAME_RATE_WISH, _unit_wish("quality")]},
        "default_configuration": {"placement": placement},
        "context_events": [
            {"at": 1000, "action": "set_station_load", "target": stations[0], "value": 3 * capacities[stations[0]]},
        ],
        "parameters": {"horizon_ms": 2000, "seed": seed, "ring_radius": 2},
    }


# ---------------------------------------------------------------------------
# videoconf-language
# ---------------------------------------------------------------------------
def videoconf_document() -> Dict[str, Any]:
    return {
        "name": VIDEOCONF,
        "description": "speech path whose comprehension is watched by a language spy",
        "application": {
            "name": "videoconference",
            "characteristics": [
                {"id": "transcription_quality", "kind": "intrinsic"},
                {"id": "comprehension", "kind": "contextual", "description": "reported by the language spy"},
                {"id": "frame_rate", "kind": "contextual", "unit": "frames/s"},
            ],
            "groups": [{
                "id": "conference",
                "subgroups": [{
                    "id": "speech",
                    "characteristics": ["transcription_quality", "comprehension", "frame_rate"],
                    "slots": [
                        {
                            "id": "microphone",
                            "admissible_stations": ["laptop"],
                            "input_ports": [],
                            "variants": [{"id": "mic", "power_rank": 1, "cpu_demand": 0.5}],
                        },
                        {
                            "id": "subtitles",
                            "variants": [
                                {
                                    "id": "passthrough", "power_rank": 1, "cpu_demand": 0.5,
                                    "intrinsic_contribution": {"transcription_quality": 0.9},
                                },
                                {
                                    "id": "subtitler", "power_rank": 2, "cpu_demand": 1.5,
                                    "intrinsic_contribution": {"transcription_quality": 0.9},
                                },
                            ],
                        },
                    ],
                    "conducts": [{"id": "voice", "source": "microphone.out", "sink": "subtitles.in"}],
                }],
            }],
            "stations": [{"id": "laptop", "capacity": 4.0}, {"id": "server", "capacity": 8.0}],
            "links": [{"id": "lan", "endpoints": ["laptop", "server"], "bandwidth": 1000.0, "latency": 5.0}],
            "source_values": {"frame_rate": 25.0},
        },
        "user": {"wishes": [FRAME_RATE_WISH, _unit_wish("transcription_quality"), _unit_wish("comprehension")]},
        "default_configuration": {
            "placement": {
                "microphone": {"variant": "mic", "station": "laptop"},
                "subtitles": {"variant": "passthrough", "station": "laptop"},
            },
        },
        "spies": [{
            "id": "language_spy",
            "slot": "subtitles",
            "watch": "language",
            "characteristic": "comprehension",
            "marks": {"en": 1.0, "fr": 0.3},
            "default_mark": 0.5,
            "variant_marks": {"subtitler": 0.9},
        }],
        "environment": {"language": "en"},
        "context_events": [{"at": 1000, "action": "set_environment", "target": "language", "value": "fr"}],
        "parameters": {"horizon_ms": 2000},
    }


def reference_document(name: str, seed: int = 0) -> Dict[str, Any]:
    m = _SCALING_RE.match(name.replace(" ", ""))
    if m:
        return scaling_document(int(m.group(1)), int(m.group(2)), int(m.group(3)), seed=seed)
    if name == SURVEILLANCE:
        return surveillance_document()
    if name == SURVEILLANCE_OSCILLATING:
        return surveillance_document(oscillating=True)
    if name == TOY6:
        return toy6_document()
    if name == SCALING:
        return scaling_document(3, 3, 2, seed=seed)
    if name == VIDEOCONF:
        return videoconf_document()
    raise UnknownName(f"unknown reference scenario '{name}' (known: {', '.join(REFERENCE_NAMES)}, scaling(n,v,s))")


def generate_reference_scenario(
    name: str,
    base_params: Optional[SimulationParams] = None,
    *,
    seed: int = 0,
) -> ScenarioFile:
    # bundled scenarios ignore RECONFIG_* overrides unless a base is passed
    return parse_document(reference_document(name, seed=seed), base_params or SimulationParams())
