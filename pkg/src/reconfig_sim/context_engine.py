"""
context_engine.py

What this file does:
  - Holds the execution context (station loads, link state, environment)
    and applies timed ContextEvents to it
  - "Executes" a configuration: sweeps the conduct graph in topological order,
    transforming characteristic values through each variant and each route
  - Marks every measurement point and spy, builds the QoSReport
  - Compares two reports and emits reconfiguration events naming a culprit

This file does NOT:
  - Choose or commit configurations
  - Keep any state between calls; the runtime owns the ContextState

Load model: a station grants each hosted variant capacity * demand / (total demand
+ external load), so resource_factor = min(1, capacity / (total demand + load)).
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Set, Tuple, Union

from .app_model import (
    Application,
    Configuration,
    Route,
    TransferFunction,
    TransferRule,
    intrinsic_characteristic_marks,
)
from .errors import UnknownCharacteristic, UnknownEntity
from .event_manager import DEGRADATION, IMPROVEMENT, SPY, ReconfigurationEvent
from .qos_model import CONTEXTUAL, QoSReport, UserProfile, evaluate_hierarchy, mark_characteristic

__all__ = [
    "ContextEvent",
    "ContextState",
    "FlowState",
    "SpyAgent",
    "TransferFunction",
    "TransferRule",
    "apply_context_event",
    "detect_reconfiguration_events",
    "evaluate_configuration",
    "initial_context",
    "measured_characteristics",
    "measurement_points",
    "propagate_flows",
    "resource_factors",
]

logger = logging.getLogger(__name__)

SET_BANDWIDTH = "set_bandwidth"
SET_LATENCY = "set_latency"
SET_STATION_LOAD = "set_station_load"
SET_ENVIRONMENT = "set_environment"
CONTEXT_ACTIONS = (SET_BANDWIDTH, SET_LATENCY, SET_STATION_LOAD, SET_ENVIRONMENT)


@dataclass(frozen=True)
class ContextState:
    time: int
    station_loads: Mapping[str, float]
    station_capacity: Mapping[str, float]
    # link id -> (bandwidth kbit/s, latency ms)
    link_state: Mapping[str, Tuple[float, float]]
    environment: Mapping[str, str] = field(default_factory=dict)

    def saturated(self, station: str) -> bool:
        return self.station_loads[station] >= self.station_capacity[station]

    def bandwidth(self, link: str) -> float:
        return self.link_state[link][0]

    def latency(self, link: str) -> float:
        return self.link_state[link][1]


@dataclass(frozen=True)
class ContextEvent:
    at: int
    action: str
    target: str
    value: Union[float, str]

    def to_dict(self) -> Dict[str, object]:
        return {"at": self.at, "action": self.action, "target": self.target, "value": self.value}


@dataclass(frozen=True)
class FlowState:
    # per conduct: characteristic -> value leaving the source port / reaching the sink
    emitted: Mapping[str, Mapping[str, float]]
    delivered: Mapping[str, Mapping[str, float]]
    outputs: Mapping[Tuple[str, str], Mapping[str, float]]
    resource_factors: Mapping[str, float]
    # local conditions used to locate culprits
    slot_conditions: Mapping[str, Tuple[str, str, float]]
    conduct_conditions: Mapping[str, Tuple[Route, float, float]]


@dataclass(frozen=True)
class SpyAgent:
    id: str
    slot: str
    watch: str
    characteristic: str
    marks: Mapping[str, float]
    default_mark: float = 0.5
    # a variant that neutralises the watched condition (e.g. subtitles)
    variant_marks: Mapping[str, float] = field(default_factory=dict)

    def mark_for(self, environment: Mapping[str, str], variant: str) -> float:
        if variant in self.variant_marks:
            return self.variant_marks[variant]
        value = environment.get(self.watch)
        if value is None:
            return self.default_mark
        return self.marks.get(value, self.default_mark)


def initial_context(app: Application, environment: Optional[Mapping[str, str]] = None, time: int = 0) -> ContextState:
    return ContextState(
        time=time,
        station_loads={s.id: s.base_load for s in app.stations.values()},
        station_capacity={s.id: s.capacity for s in app.stations.values()},
        link_state={l.id: (l.bandwidth, l.latency) for l in app.links.values()},
        environment=dict(environment or {}),
    )


def apply_context_event(state: ContextState, ev: ContextEvent) -> ContextState:
    if ev.at < state.time:
        raise ValueError(f"context event at {ev.at} ms precedes state time {state.time} ms")
    if ev.action in (SET_BANDWIDTH, SET_LATENCY):
        if ev.target not in state.link_state:
            raise UnknownEntity(f"unknown link '{ev.target}'")
        bw, lat = state.link_state[ev.target]
        links = dict(state.link_state)
        links[ev.target] = (float(ev.value), lat) if ev.action == SET_BANDWIDTH else (bw, float(ev.value))
        return replace(state, time=ev.at, link_state=links)
    if ev.action == SET_STATION_LOAD:
        if ev.target not in state.station_loads:
            raise UnknownEntity(f"unknown station '{ev.target}'")
        loads = dict(state.station_loads)
        loads[ev.target] = float(ev.value)
        return replace(state, time=ev.at, station_loads=loads)
    if ev.action == SET_ENVIRONMENT:
        env = dict(state.environment)
        env[ev.target] = str(ev.value)
        return replace(state, time=ev.at, environment=env)
    raise UnknownEntity(f"unknown context action '{ev.action}'")


def resource_factors(cfg: Configuration, app: Application, state: ContextState) -> Dict[str, float]:
    demand: Dict[str, float] = {}
    for slot, variant, station in cfg.placement:
        demand[station] = demand.get(station, 0.0) + app.variants[variant].cpu_demand
    out: Dict[str, float] = {}
    for slot, variant, station in cfg.placement:
        if app.variants[variant].cpu_demand <= 0:
            out[slot] = 1.0
            continue
        total = demand[station] + state.station_loads.get(station, 0.0)
        out[slot] = min(1.0, state.station_capacity[station] / total)
    return out


def _worse(app: Application, char: str, a: float, b: float) -> float:
    c = app.characteristics.get(char)
    if c is None or c.higher_is_better:
        return min(a, b)
    return max(a, b)


def _route_condition(route: Route, state: ContextState) -> Tuple[float, float]:
    if not route:
        return math.inf, 0.0
    return min(state.bandwidth(l) for l in route), sum(state.latency(l) for l in route)


def propagate_flows(cfg: Configuration, app: Application, state: ContextState) -> FlowState:
    rf = resource_factors(cfg, app, state)
    outputs: Dict[Tuple[str, str], Dict[str, float]] = {}
    emitted: Dict[str, Dict[str, float]] = {}
    delivered: Dict[str, Dict[str, float]] = {}
    conduct_conditions: Dict[str, Tuple[Route, float, float]] = {}

    for slot_id in app.slot_order():
        slot = app.slots[slot_id]
        variant = app.variants[cfg.variant_of(slot_id)]
        incoming = app.incoming(slot_id)
        if incoming:
            merged: Dict[str, float] = {}
            for c in incoming:
                for ch, v in delivered[c.id].items():
                    merged[ch] = v if ch not in merged else _worse(app, ch, merged[ch], v)
        else:
            merged = dict(app.source_values)

        outgoing = app.outgoing(slot_id)
        for port in slot.output_ports:
            required = {ch for c in outgoing if c.source[1] == port for ch in c.required_characteristics}
            chars = sorted(set(merged) | set(variant.transfer.characteristics_for(port)) | required)
            values: Dict[str, float] = {}
            for ch in chars:
                hib = app.characteristics[ch].higher_is_better if ch in app.characteristics else True
                rule = variant.transfer.rule_for(port, ch)
                values[ch] = rule.apply(merged.get(ch, 0.0), rf[slot_id], hib)
            outputs[(slot_id, port)] = values

        for c in outgoing:
            values = outputs[(slot_id, c.source[1])]
            carried = list(c.required_characteristics) or sorted(values)
            sent = {ch: values[ch] for ch in carried if ch in values}
            route = cfg.route_of(c.id)
            bw, lat = _route_condition(route, state)
            got: Dict[str, float] = {}
            for ch, v in sent.items():
                role = app.characteristics[ch].flow_role if ch in app.characteristics else "other"
                if role == "bitrate":
                    got[ch] = min(v, bw)
                elif role == "delay":
                    got[ch] = v + lat
                else:
                    got[ch] = v
            emitted[c.id] = sent
            delivered[c.id] = got
            conduct_conditions[c.id] = (route, bw, lat)

    slot_conditions = {
        s: (v, st, round(rf[s], 12)) for s, v, st in cfg.placement
    }
    return FlowState(
        emitted=emitted,
        delivered=delivered,
        outputs=outputs,
        resource_factors=rf,
        slot_conditions=slot_conditions,
        conduct_conditions=conduct_conditions,
    )


@dataclass(frozen=True)
class MeasurementPoint:
    id: str
    subgroup: str
    conduct: Optional[str] = None
    output: Optional[Tuple[str, str]] = None


def measurement_points(app: Application) -> List[MeasurementPoint]:
    """Every conduct plus every output port no conduct leaves from."""
    key = "measurement_points"
    if key not in app._cache:
        points = [MeasurementPoint(id=c, subgroup=app.subgroup_of_conduct(c), conduct=c) for c in app.conduct_ids()]
        used = {c.source for c in app.conducts.values()}
        for slot_id in app.slot_ids():
            slot = app.slots[slot_id]
            for port in slot.output_ports:
                if (slot_id, port) not in used:
                    points.append(MeasurementPoint(id=f"{slot_id}.{port}", subgroup=slot.subgroup, output=(slot_id, port)))
        app._cache[key] = points
    return list(app._cache[key])  # type: ignore[arg-type]


def measured_characteristics(app: Application, spies: Sequence[SpyAgent] = ()) -> Dict[str, Set[str]]:
    """
    Characteristics every configuration delivers to some measurement point (or
    spy) of each sub-group. Mirrors the key sets built by propagate_flows; a
    transfer rule only counts when all admissible variants of the slot have it.
    """
    delivered: Dict[str, Set[str]] = {}
    outputs: Dict[Tuple[str, str], Set[str]] = {}
    for slot_id in app.slot_order():
        slot = app.slots[slot_id]
        incoming = app.incoming(slot_id)
        merged: Set[str] = set().union(*(delivered[c.id] for c in incoming)) if incoming else set(app.source_values)
        outgoing = app.outgoing(slot_id)
        for port in slot.output_ports:
            per_variant = [set(app.variants[v].transfer.characteristics_for(port)) for v in slot.admissible_variants]
            common = set.intersection(*per_variant) if per_variant else set()
            required = {ch for c in outgoing if c.source[1] == port for ch in c.required_characteristics}
            outputs[(slot_id, port)] = merged | common | required
        for c in outgoing:
            delivered[c.id] = set(c.required_characteristics) or set(outputs[(slot_id, c.source[1])])

    measured: Dict[str, Set[str]] = {sg: set() for sg in app.subgroups}
    for point in measurement_points(app):
        keys = delivered[point.conduct] if point.conduct is not None else outputs[point.output]  # type: ignore[index]
        measured[point.subgroup] |= keys
    for spy in spies:
        measured[app.slots[spy.slot].subgroup].add(spy.characteristic)
    return measured


def _point_values(point: MeasurementPoint, flows: FlowState) -> Mapping[str, float]:
    if point.conduct is not None:
        return flows.delivered.get(point.conduct, {})
    return flows.outputs.get(point.output, {})  # type: ignore[arg-type]


def evaluate_configuration(
    cfg: Configuration,
    app: Application,
    state: ContextState,
    user: UserProfile,
    spies: Sequence[SpyAgent] = (),
    at: Optional[int] = None,
) -> QoSReport:
    flows = propagate_flows(cfg, app, state)
    marks: Dict[Tuple[str, str], float] = dict(intrinsic_characteristic_marks(cfg, app))

    point_marks: Dict[str, Dict[str, float]] = {}
    by_subgroup: Dict[Tuple[str, str], List[float]] = {}
    for point in measurement_points(app):
        pm: Dict[str, float] = {}
        for ch, value in sorted(_point_values(point, flows).items()):
            char = app.characteristics.get(ch)
            wish = user.wish(ch)
            if char is None or wish is None or char.kind != CONTEXTUAL:
                continue
            pm[ch] = mark_characteristic(value, wish)
            by_subgroup.setdefault((point.subgroup, ch), []).append(pm[ch])
        point_marks[point.id] = pm

    spy_marks: Dict[str, float] = {}
    for spy in sorted(spies, key=lambda s: s.id):
        m = spy.mark_for(state.environment, cfg.variant_of(spy.slot))
        spy_marks[spy.id] = m
        by_subgroup.setdefault((app.slots[spy.slot].subgroup, spy.characteristic), []).append(m)

    for sg_id in sorted(app.subgroups):
        for ch in app.subgroups[sg_id].characteristics:
            char = app.characteristics.get(ch)
            if char is None:
                raise UnknownCharacteristic(ch, f"sub-group '{sg_id}'")
            if char.kind != CONTEXTUAL or user.wish(ch) is None:
                continue
            vals = by_subgroup.get((sg_id, ch))
            if not vals:
                raise UnknownCharacteristic(ch, f"sub-group '{sg_id}'")
            marks[(sg_id, ch)] = min(vals)

    return evaluate_hierarchy(
        app,
        marks,
        user,
        timestamp=state.time if at is None else at,
        point_marks=point_marks,
        spy_marks=spy_marks,
        environment=state.environment,
        config_id=cfg.config_id,
        flows=flows,
    )


def _locate_culprit(point: MeasurementPoint, app: Application, prev: Optional[FlowState], cur: FlowState) -> str:
    producer = app.conducts[point.conduct].source_slot if point.conduct is not None else point.output[0]  # type: ignore[index]
    if prev is None:
        return producer
    start: Tuple[str, str] = ("conduct", point.conduct) if point.conduct is not None else ("slot", producer)
    queue = [start]
    seen = {start}
    while queue:
        kind, ident = queue.pop(0)
        if kind == "conduct":
            if prev.conduct_conditions.get(ident) != cur.conduct_conditions.get(ident):
                return ident
            nxt = [("slot", app.conducts[ident].source_slot)]
        else:
            if prev.slot_conditions.get(ident) != cur.slot_conditions.get(ident):
                return ident
            nxt = [("conduct", c.id) for c in app.incoming(ident)]
        for item in nxt:
            if item not in seen:
                seen.add(item)
                queue.append(item)
    return producer


def detect_reconfiguration_events(
    prev: QoSReport,
    cur: QoSReport,
    app: Application,
    spies: Sequence[SpyAgent] = (),
    *,
    threshold: float = 0.1,
    point_thresholds: Optional[Mapping[str, float]] = None,
    ids: Optional[Iterator[int]] = None,
) -> List[ReconfigurationEvent]:
    """
    One degradation and/or one improvement event per measurement point whose
    mark moved by more than its threshold, plus one spy event per watched
    environment value that changed.
    """
    ids = ids if ids is not None else itertools.count(1)
    point_thresholds = point_thresholds or {}
    prev_flows: Optional[FlowState] = prev.flows
    cur_flows: FlowState = cur.flows
    events: List[ReconfigurationEvent] = []

    for point in measurement_points(app):
        before = prev.point_marks.get(point.id, {})
        after = cur.point_marks.get(point.id, {})
        th = point_thresholds.get(point.id, threshold)
        deltas = {ch: after[ch] - before[ch] for ch in sorted(set(before) & set(after))}
        down = [ch for ch, d in deltas.items() if d < -th]
        up = [ch for ch, d in deltas.items() if d > th]
        if not down and not up:
            continue
        culprit = _locate_culprit(point, app, prev_flows, cur_flows)
        if down:
            events.append(ReconfigurationEvent(
                id=next(ids), at=cur.timestamp, kind=DEGRADATION, culprit=culprit,
                affected_characteristics=tuple(down), mark_delta=min(deltas[c] for c in down), point=point.id,
            ))
        if up:
            events.append(ReconfigurationEvent(
                id=next(ids), at=cur.timestamp, kind=IMPROVEMENT, culprit=culprit,
                affected_characteristics=tuple(up), mark_delta=max(deltas[c] for c in up), point=point.id,
            ))

    for spy in sorted(spies, key=lambda s: s.id):
        if prev.environment.get(spy.watch) == cur.environment.get(spy.watch):
            continue
        delta = cur.spy_marks.get(spy.id, spy.default_mark) - prev.spy_marks.get(spy.id, spy.default_mark)
        events.append(ReconfigurationEvent(
            id=next(ids), at=cur.timestamp, kind=SPY, culprit=spy.slot,
            affected_characteristics=(spy.characteristic,), mark_delta=delta, point=spy.id,
        ))

    if events:
        logger.debug("t=%s detected %d event(s)", cur.timestamp, len(events))
    return events
