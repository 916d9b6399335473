"""Small scenario documents and hypothesis strategies shared by the tests."""

from __future__ import annotations

import copy
from typing import Any, Dict, List, Sequence, Tuple

from hypothesis import strategies as st

from reconfig_sim.reference_scenarios import FRAME_RATE_WISH, SCALED, toy6_document

QUALITIES = (0.3, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


def chain_document(
    slots: Sequence[Sequence[Tuple[float, int]]],
    stations: Sequence[Tuple[int, int]],
    default: Sequence[Tuple[int, int]],
) -> Dict[str, Any]:
    """
    slots:    per slot, (intrinsic quality, cpu demand) of each variant
    stations: (capacity, base load) of each station, fully meshed
    default:  per slot, (variant index, station index)
    """
    st_ids = [f"H{i}" for i in range(len(stations))]
    links = [
        {"id": f"L_{a}_{b}", "endpoints": [a, b], "bandwidth": 10000.0, "latency": 10.0}
        for i, a in enumerate(st_ids) for b in st_ids[i + 1:]
    ]
    raw_slots: List[Dict[str, Any]] = []
    conducts: List[Dict[str, Any]] = []
    placement: Dict[str, Any] = {}
    for i, variants in enumerate(slots):
        raw_slots.append({
            "id": f"s{i}",
            "variants": [
                {
                    "id": f"s{i}_v{j}",
                    "power_rank": j,
                    "cpu_demand": float(demand),
                    "intrinsic_contribution": {"quality": quality},
                    "transfer": {"out": {"frame_rate": dict(SCALED)}},
                }
                for j, (quality, demand) in enumerate(variants)
            ],
        })
        if i + 1 < len(slots):
            conducts.append({"id": f"c{i}", "source": f"s{i}.out", "sink": f"s{i + 1}.in"})
        v_idx, s_idx = default[i]
        placement[f"s{i}"] = {"variant": f"s{i}_v{v_idx}", "station": st_ids[s_idx]}
    return {
        "name": "chain",
        "application": {
            "name": "chain",
            "characteristics": [
                {"id": "quality", "kind": "intrinsic"},
                {"id": "frame_rate", "kind": "contextual", "unit": "frames/s"},
            ],
            "groups": [{
                "id": "g",
                "subgroups": [{
                    "id": "sg",
                    "characteristics": ["quality", "frame_rate"],
                    "slots": raw_slots,
                    "conducts": conducts,
                }],
            }],
            "stations": [
                {"id": sid, "capacity": float(cap), "base_load": float(load)}
                for sid, (cap, load) in zip(st_ids, stations)
            ],
            "links": links,
            "source_values": {"frame_rate": 25.0},
        },
        "user": {"wishes": [FRAME_RATE_WISH, {"characteristic": "quality", "breakpoints": [[0.0, 0.0], [1.0, 1.0]]}]},
        "default_configuration": {"placement": placement},
        "parameters": {"horizon_ms": 1000},
    }


@st.composite
def chain_documents(draw) -> Dict[str, Any]:
    variant = st.tuples(st.sampled_from(QUALITIES), st.integers(min_value=1, max_value=4))
    slots = draw(st.lists(st.lists(variant, min_size=1, max_size=3), min_size=2, max_size=3))
    stations = draw(st.lists(
        st.tuples(st.integers(min_value=2, max_value=10), st.integers(min_value=0, max_value=2)),
        min_size=1, max_size=3,
    ))
    default = [
        (draw(st.integers(0, len(v) - 1)), draw(st.integers(0, len(stations) - 1)))
        for v in slots
    ]
    return chain_document(slots, stations, default)


def single_configuration_document() -> Dict[str, Any]:
    """toy6 with one variant per slot: exactly one configuration."""
    doc = copy.deepcopy(toy6_document())
    for sl in doc["application"]["groups"][0]["subgroups"][0]["slots"]:
        sl["variants"] = sl["variants"][:1]
    return doc


def ceiling_document(quality: float = 1.0) -> Dict[str, Any]:
    """toy6 whose default already scores the maximum."""
    doc = copy.deepcopy(toy6_document())
    for sl in doc["application"]["groups"][0]["subgroups"][0]["slots"]:
        for v in sl["variants"]:
            v["intrinsic_contribution"] = {"quality": quality}
    return doc


def deferral_document() -> Dict[str, Any]:
    """
    Two single-slot sub-groups whose "mood" is scored by spies watching "mode".
    Only b has an alternative (b2, lower quality, immune to the storm), so a
    storm raises one event per slot: the one on a finds nothing, the one on b
    swaps in b2. k_adjacent is 0 so only b's own sub-group search reaches b2.
    """
    unit = [[0.0, 0.0], [1.0, 1.0]]

    def spy(slot: str, **extra: Any) -> Dict[str, Any]:
        return {
            "id": f"spy_{slot}", "slot": slot, "watch": "mode", "characteristic": "mood",
            "marks": {"calm": 1.0, "storm": 0.2}, "default_mark": 1.0, **extra,
        }

    def subgroup(slot: str, variants: List[Tuple[str, float]]) -> Dict[str, Any]:
        return {
            "id": f"sg_{slot}",
            "characteristics": ["quality", "mood"],
            "slots": [{
                "id": slot,
                "variants": [
                    {"id": v, "power_rank": rank, "cpu_demand": 1.0, "intrinsic_contribution": {"quality": q}}
                    for rank, (v, q) in enumerate(variants, start=1)
                ],
            }],
        }

    return {
        "name": "deferral",
        "application": {
            "name": "deferral",
            "characteristics": [
                {"id": "quality", "kind": "intrinsic"},
                {"id": "mood", "kind": "contextual"},
            ],
            "groups": [{"id": "g", "subgroups": [subgroup("a", [("a1", 1.0)]), subgroup("b", [("b1", 1.0), ("b2", 0.6)])]}],
            "stations": [{"id": "host", "capacity": 10.0}],
        },
        "user": {"wishes": [
            {"characteristic": "quality", "breakpoints": unit},
            {"characteristic": "mood", "breakpoints": unit},
        ]},
        "default_configuration": {
            "placement": {"a": {"variant": "a1", "station": "host"}, "b": {"variant": "b1", "station": "host"}},
        },
        "spies": [spy("a"), spy("b", variant_marks={"b2": 1.0})],
        "environment": {"mode": "calm"},
        "context_events": [
            {"at": 1000, "action": "set_environment", "target": "mode", "value": "storm"},
            {"at": 2000, "action": "set_environment", "target": "weather", "value": "rain"},
        ],
        "parameters": {"horizon_ms": 2500, "k_adjacent": 0},
    }
