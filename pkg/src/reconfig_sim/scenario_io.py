"""
scenario_io.py

What this file does:
  - Parses a scenario JSON document into a ScenarioFile (application, user profile,
    default configuration, spy agents, environment, timed context events, parameters)
  - Validates structure and referential integrity, filling defaults from SimulationParams
  - Serializes a ScenarioFile back to canonical JSON (sorted keys, 2-space indent)

This file does NOT:
  - Run anything; see platform_runtime

Error mapping:
  - malformed JSON or wrong shapes -> ScenarioSyntaxError
  - an id that points nowhere      -> ScenarioReferenceError
  - a violated invariant           -> ScenarioConstraintError
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from .app_model import (
    Application,
    ComponentVariant,
    Conduct,
    Configuration,
    Group,
    Link,
    ProcessorSlot,
    Station,
    SubGroup,
    TransferFunction,
    TransferRule,
    validate_configuration,
)
from .config import SimulationParams, default_params
from .context_engine import CONTEXT_ACTIONS, SET_ENVIRONMENT, SET_STATION_LOAD, ContextEvent, SpyAgent, measured_characteristics
from .errors import CyclicTopology, ScenarioConstraintError, ScenarioReferenceError, ScenarioSyntaxError
from .qos_model import CONTEXTUAL, INTRINSIC, Characteristic, UserProfile, WishFunction

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ScenarioFile:
    name: str
    app: Application
    user: UserProfile
    default: Configuration
    spies: Tuple[SpyAgent, ...] = ()
    environment: Mapping[str, str] = field(default_factory=dict)
    context_events: Tuple[ContextEvent, ...] = ()
    params: SimulationParams = field(default_factory=SimulationParams)
    description: str = ""


# ---------------------------------------------------------------------------
# small readers
# ---------------------------------------------------------------------------
def _obj(value: Any, path: str) -> Mapping[str, Any]:
    if not isinstance(value, dict):
        raise ScenarioSyntaxError(f"{path}: expected an object")
    return value


def _list(value: Any, path: str) -> List[Any]:
    if not isinstance(value, list):
        raise ScenarioSyntaxError(f"{path}: expected a list")
    return value


def _req(obj: Mapping[str, Any], key: str, path: str) -> Any:
    if key not in obj:
        raise ScenarioSyntaxError(f"{path}: missing '{key}'")
    return obj[key]


def _str(value: Any, path: str) -> str:
    if not isinstance(value, str) or not value:
        raise ScenarioSyntaxError(f"{path}: expected a non-empty string")
    return value


def _num(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioSyntaxError(f"{path}: expected a number")
    if not math.isfinite(float(value)):
        raise ScenarioConstraintError("finite-number", f"{path} must be finite")
    return float(value)


def _int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioSyntaxError(f"{path}: expected an integer")
    return value


def _unique(ids: Sequence[str], what: str) -> None:
    seen = set()
    for i in ids:
        if i in seen:
            raise ScenarioConstraintError(f"unique-{what}-id", f"duplicate {what} id '{i}'")
        seen.add(i)


def _endpoint(value: Any, path: str) -> Tuple[str, str]:
    text = _str(value, path)
    if "." not in text:
        raise ScenarioSyntaxError(f"{path}: expected 'slot.port', got '{text}'")
    slot, port = text.rsplit(".", 1)
    return slot, port


# ---------------------------------------------------------------------------
# application
# ---------------------------------------------------------------------------
def _parse_rule(raw: Any, path: str) -> TransferRule:
    r = _obj(raw, path)
    try:
        return TransferRule(
            a=_num(r.get("a", 1.0), f"{path}.a"),
            b=_num(r.get("b", 0.0), f"{path}.b"),
            lo=_num(r.get("lo", 0.0), f"{path}.lo"),
            hi=_num(r.get("hi", 1e12), f"{path}.hi"),
            scaled=bool(r.get("scaled", False)),
        )
    except ValueError as e:
        if isinstance(e, (ScenarioSyntaxError, ScenarioConstraintError)):
            raise
        raise ScenarioConstraintError("transfer-bounds", f"{path}: {e}") from e


def _parse_application(doc: Mapping[str, Any]) -> Application:
    raw = _obj(_req(doc, "application", "$"), "application")

    chars: Dict[str, Characteristic] = {}
    raw_chars = _list(_req(raw, "characteristics", "application"), "application.characteristics")
    _unique([_str(_req(_obj(c, "characteristic"), "id", "characteristic"), "characteristic.id") for c in raw_chars], "characteristic")
    for i, c in enumerate(raw_chars):
        path = f"application.characteristics[{i}]"
        try:
            ch = Characteristic(
                id=c["id"],
                kind=_str(_req(c, "kind", path), f"{path}.kind"),
                unit=str(c.get("unit", "")),
                description=str(c.get("description", "")),
                higher_is_better=bool(c.get("higher_is_better", True)),
                flow_role=str(c.get("flow_role", "other")),
            )
        except ValueError as e:
            if isinstance(e, ScenarioSyntaxError):
                raise
            raise ScenarioConstraintError("characteristic-kind", str(e)) from e
        chars[ch.id] = ch

    stations: Dict[str, Station] = {}
    raw_stations = _list(_req(raw, "stations", "application"), "application.stations")
    _unique([_str(_req(_obj(s, "station"), "id", "station"), "station.id") for s in raw_stations], "station")
    for i, s in enumerate(raw_stations):
        path = f"application.stations[{i}]"
        cap = _num(_req(s, "capacity", path), f"{path}.capacity")
        base = _num(s.get("base_load", 0.0), f"{path}.base_load")
        if cap <= 0:
            raise ScenarioConstraintError("station-capacity", f"station '{s['id']}' capacity must be > 0")
        if base < 0 or base > cap:
            raise ScenarioConstraintError("station-base-load", f"station '{s['id']}' base_load must be in [0, capacity]")
        stations[s["id"]] = Station(id=s["id"], capacity=cap, base_load=base)

    links: Dict[str, Link] = {}
    raw_links = _list(raw.get("links", []), "application.links")
    _unique([_str(_req(_obj(l, "link"), "id", "link"), "link.id") for l in raw_links], "link")
    for i, l in enumerate(raw_links):
        path = f"application.links[{i}]"
        ends = _list(_req(l, "endpoints", path), f"{path}.endpoints")
        if len(ends) != 2:
            raise ScenarioSyntaxError(f"{path}.endpoints: expected two station ids")
        for e in ends:
            if e not in stations:
                raise ScenarioReferenceError(str(e), f"link '{l['id']}' endpoint")
        if ends[0] == ends[1]:
            raise ScenarioConstraintError("link-endpoints-distinct", f"link '{l['id']}' joins '{ends[0]}' to itself")
        bw = _num(_req(l, "bandwidth", path), f"{path}.bandwidth")
        lat = _num(_req(l, "latency", path), f"{path}.latency")
        if bw < 0 or lat < 0:
            raise ScenarioConstraintError("link-non-negative", f"link '{l['id']}' bandwidth and latency must be >= 0")
        links[l["id"]] = Link(id=l["id"], endpoints=(ends[0], ends[1]), bandwidth=bw, latency=lat)

    groups: Dict[str, Group] = {}
    subgroups: Dict[str, SubGroup] = {}
    slots: Dict[str, ProcessorSlot] = {}
    variants: Dict[str, ComponentVariant] = {}
    conducts: Dict[str, Conduct] = {}
    pending_conducts: List[Tuple[str, Mapping[str, Any], str]] = []

    for gi, g in enumerate(_list(_req(raw, "groups", "application"), "application.groups")):
        gpath = f"application.groups[{gi}]"
        g = _obj(g, gpath)
        g_id = _str(_req(g, "id", gpath), f"{gpath}.id")
        if g_id in groups:
            raise ScenarioConstraintError("unique-group-id", f"duplicate group id '{g_id}'")
        sg_ids: List[str] = []
        for si, sg in enumerate(_list(_req(g, "subgroups", gpath), f"{gpath}.subgroups")):
            spath = f"{gpath}.subgroups[{si}]"
            sg = _obj(sg, spath)
            sg_id = _str(_req(sg, "id", spath), f"{spath}.id")
            if sg_id in subgroups:
                raise ScenarioConstraintError("unique-subgroup-id", f"duplicate sub-group id '{sg_id}'")
            sg_chars = [_str(c, f"{spath}.characteristics") for c in _list(sg.get("characteristics", []), f"{spath}.characteristics")]
            for c in sg_chars:
                if c not in chars:
                    raise ScenarioReferenceError(c, f"sub-group '{sg_id}' characteristic")
            slot_ids: List[str] = []
            for li, sl in enumerate(_list(_req(sg, "slots", spath), f"{spath}.slots")):
                lpath = f"{spath}.slots[{li}]"
                sl = _obj(sl, lpath)
                slot_id = _str(_req(sl, "id", lpath), f"{lpath}.id")
                if slot_id in slots:
                    raise ScenarioConstraintError("unique-slot-id", f"duplicate slot id '{slot_id}'")
                outputs = tuple(_str(p, f"{lpath}.output_ports") for p in _list(sl.get("output_ports", ["out"]), f"{lpath}.output_ports"))
                inputs = tuple(_str(p, f"{lpath}.input_ports") for p in _list(sl.get("input_ports", ["in"]), f"{lpath}.input_ports"))
                pinned = sl.get("admissible_stations")
                if pinned is not None:
                    pinned = tuple(_str(p, f"{lpath}.admissible_stations") for p in _list(pinned, f"{lpath}.admissible_stations"))
                    for p in pinned:
                        if p not in stations:
                            raise ScenarioReferenceError(p, f"slot '{slot_id}' admissible station")
                raw_variants = _list(_req(sl, "variants", lpath), f"{lpath}.variants")
                if not raw_variants:
                    raise ScenarioConstraintError("admissible-variants-non-empty", f"slot '{slot_id}' has no variant")
                ranks = set()
                v_ids: List[str] = []
                for vi, v in enumerate(raw_variants):
                    vpath = f"{lpath}.variants[{vi}]"
                    v = _obj(v, vpath)
                    v_id = _str(_req(v, "id", vpath), f"{vpath}.id")
                    if v_id in variants:
                        raise ScenarioConstraintError("unique-variant-id", f"duplicate variant id '{v_id}'")
                    rank = _int(v.get("power_rank", 0), f"{vpath}.power_rank")
                    if rank in ranks:
                        raise ScenarioConstraintError("power-rank-unique", f"slot '{slot_id}' repeats power_rank {rank}")
                    ranks.add(rank)
                    contrib: Dict[str, float] = {}
                    for c, m in _obj(v.get("intrinsic_contribution", {}), f"{vpath}.intrinsic_contribution").items():
                        if c not in chars:
                            raise ScenarioReferenceError(c, f"variant '{v_id}' intrinsic contribution")
                        if chars[c].kind != INTRINSIC:
                            raise ScenarioConstraintError("contribution-intrinsic-only", f"variant '{v_id}' contributes to contextual '{c}'")
                        m = _num(m, f"{vpath}.intrinsic_contribution.{c}")
                        if not 0.0 <= m <= 1.0:
                            raise ScenarioConstraintError("mark-range", f"variant '{v_id}' contribution {m} outside [0,1]")
                        contrib[c] = m
                    rules: Dict[str, Dict[str, TransferRule]] = {}
                    for port, per_char in _obj(v.get("transfer", {}), f"{vpath}.transfer").items():
                        if port not in outputs:
                            raise ScenarioReferenceError(port, f"variant '{v_id}' transfer port")
                        rules[port] = {}
                        for c, rule in _obj(per_char, f"{vpath}.transfer.{port}").items():
                            if c not in chars:
                                raise ScenarioReferenceError(c, f"variant '{v_id}' transfer rule")
                            rules[port][c] = _parse_rule(rule, f"{vpath}.transfer.{port}.{c}")
                    demand = _num(v.get("cpu_demand", 0.0), f"{vpath}.cpu_demand")
                    if demand < 0:
                        raise ScenarioConstraintError("cpu-demand-non-negative", f"variant '{v_id}' cpu_demand < 0")
                    variants[v_id] = ComponentVariant(
                        id=v_id,
                        slot=slot_id,
                        intrinsic_contribution=contrib,
                        transfer=TransferFunction(rules=rules),
                        cpu_demand=demand,
                        power_rank=rank,
                        description=str(v.get("description", "")),
                    )
                    v_ids.append(v_id)
                slots[slot_id] = ProcessorSlot(
                    id=slot_id,
                    subgroup=sg_id,
                    admissible_variants=tuple(v_ids),
                    input_ports=inputs,
                    output_ports=outputs,
                    admissible_stations=pinned,
                )
                slot_ids.append(slot_id)
            c_ids: List[str] = []
            for ci, c in enumerate(_list(sg.get("conducts", []), f"{spath}.conducts")):
                cpath = f"{spath}.conducts[{ci}]"
                c = _obj(c, cpath)
                c_id = _str(_req(c, "id", cpath), f"{cpath}.id")
                if c_id in c_ids or any(c_id == p[0] for p in pending_conducts):
                    raise ScenarioConstraintError("unique-conduct-id", f"duplicate conduct id '{c_id}'")
                pending_conducts.append((c_id, c, cpath))
                c_ids.append(c_id)
            subgroups[sg_id] = SubGroup(
                id=sg_id, group=g_id, slots=tuple(slot_ids), conducts=tuple(c_ids), characteristics=tuple(sg_chars),
            )
            sg_ids.append(sg_id)
        groups[g_id] = Group(id=g_id, subgroups=tuple(sg_ids))

    for c_id, c, cpath in pending_conducts:
        src = _endpoint(_req(c, "source", cpath), f"{cpath}.source")
        dst = _endpoint(_req(c, "sink", cpath), f"{cpath}.sink")
        for (slot_id, port), ports_attr in ((src, "output_ports"), (dst, "input_ports")):
            if slot_id not in slots:
                raise ScenarioReferenceError(slot_id, f"conduct '{c_id}' endpoint")
            if port not in getattr(slots[slot_id], ports_attr):
                raise ScenarioReferenceError(f"{slot_id}.{port}", f"conduct '{c_id}' port")
        loopback = bool(c.get("loopback", False))
        if src[0] == dst[0] and not loopback:
            raise ScenarioConstraintError("conduct-distinct-endpoints", f"conduct '{c_id}' loops on '{src[0]}'")
        required = tuple(_str(x, f"{cpath}.required_characteristics") for x in _list(c.get("required_characteristics", []), f"{cpath}.required_characteristics"))
        for x in required:
            if x not in chars:
                raise ScenarioReferenceError(x, f"conduct '{c_id}' characteristic")
        conducts[c_id] = Conduct(id=c_id, source=src, sink=dst, required_characteristics=required, loopback=loopback)

    source_values: Dict[str, float] = {}
    for c, v in _obj(raw.get("source_values", {}), "application.source_values").items():
        if c not in chars:
            raise ScenarioReferenceError(c, "source value")
        source_values[c] = _num(v, f"application.source_values.{c}")

    app = Application(
        name=str(raw.get("name", doc.get("name", ""))),
        characteristics=chars,
        groups=groups,
        subgroups=subgroups,
        slots=slots,
        variants=variants,
        conducts=conducts,
        stations=stations,
        links=links,
        source_values=source_values,
    )
    try:
        app.slot_order()
    except CyclicTopology as e:
        raise ScenarioConstraintError("acyclic-conducts", str(e)) from e
    return app


# ---------------------------------------------------------------------------
# user, configuration, spies, context, parameters
# ---------------------------------------------------------------------------
def _parse_user(doc: Mapping[str, Any], app: Application) -> UserProfile:
    raw = _obj(_req(doc, "user", "$"), "user")
    wishes: Dict[str, WishFunction] = {}
    for i, w in enumerate(_list(_req(raw, "wishes", "user"), "user.wishes")):
        path = f"user.wishes[{i}]"
        w = _obj(w, path)
        c = _str(_req(w, "characteristic", path), f"{path}.characteristic")
        if c not in app.characteristics:
            raise ScenarioReferenceError(c, "wish characteristic")
        if c in wishes:
            raise ScenarioConstraintError("one-wish-per-characteristic", f"two wishes for '{c}'")
        bps = []
        for j, bp in enumerate(_list(_req(w, "breakpoints", path), f"{path}.breakpoints")):
            pair = _list(bp, f"{path}.breakpoints[{j}]")
            if len(pair) != 2:
                raise ScenarioSyntaxError(f"{path}.breakpoints[{j}]: expected [value, mark]")
            bps.append((_num(pair[0], f"{path}.breakpoints[{j}]"), _num(pair[1], f"{path}.breakpoints[{j}]")))
        try:
            wishes[c] = WishFunction(characteristic=c, breakpoints=tuple(bps), weight=_num(w.get("weight", 1.0), f"{path}.weight"))
        except ValueError as e:
            if isinstance(e, (ScenarioSyntaxError, ScenarioConstraintError)):
                raise
            raise ScenarioConstraintError("wish-function", str(e)) from e

    def weights(key: str, known: Mapping[str, Any], what: str) -> Dict[str, float]:
        out: Dict[str, float] = {}
        for k, v in _obj(raw.get(key, {}), f"user.{key}").items():
            if k not in known:
                raise ScenarioReferenceError(k, f"{what} weight")
            out[k] = _num(v, f"user.{key}.{k}")
            if out[k] < 0:
                raise ScenarioConstraintError("weight-non-negative", f"{what} weight for '{k}' < 0")
        return out

    user = UserProfile(
        wishes=wishes,
        subgroup_weights=weights("subgroup_weights", app.subgroups, "sub-group"),
        group_weights=weights("group_weights", app.groups, "group"),
    )
    if app.groups and sum(user.group_weight(g) for g in app.groups) <= 0:
        raise ScenarioConstraintError("weights-positive", "group weights sum to zero")
    for g in app.groups.values():
        if g.subgroups and sum(user.subgroup_weight(s) for s in g.subgroups) <= 0:
            raise ScenarioConstraintError("weights-positive", f"sub-group weights of '{g.id}' sum to zero")
    return user


def _parse_default(doc: Mapping[str, Any], app: Application) -> Configuration:
    raw = _obj(_req(doc, "default_configuration", "$"), "default_configuration")
    placement: Dict[str, Tuple[str, str]] = {}
    for slot, p in _obj(_req(raw, "placement", "default_configuration"), "default_configuration.placement").items():
        path = f"default_configuration.placement.{slot}"
        p = _obj(p, path)
        variant = _str(_req(p, "variant", path), f"{path}.variant")
        station = _str(_req(p, "station", path), f"{path}.station")
        if slot not in app.slots:
            raise ScenarioReferenceError(slot, "default configuration slot")
        if variant not in app.variants:
            raise ScenarioReferenceError(variant, "default configuration variant")
        if station not in app.stations:
            raise ScenarioReferenceError(station, "default configuration station")
        placement[slot] = (variant, station)
    routes: Dict[str, Tuple[str, ...]] = {}
    for conduct, r in _obj(raw.get("routes", {}), "default_configuration.routes").items():
        if conduct not in app.conducts:
            raise ScenarioReferenceError(conduct, "default configuration conduct")
        hops = tuple(_str(x, f"default_configuration.routes.{conduct}") for x in _list(r, f"default_configuration.routes.{conduct}"))
        for x in hops:
            if x not in app.links:
                raise ScenarioReferenceError(x, "default configuration link")
        routes[conduct] = hops
    for cid in app.conduct_ids():
        c = app.conducts[cid]
        if cid in routes or c.source_slot not in placement or c.sink_slot not in placement:
            continue
        options = app.route_options(placement[c.source_slot][1], placement[c.sink_slot][1])
        if options:
            routes[cid] = options[0]
    cfg = Configuration.build(placement, routes)
    violations = validate_configuration(cfg, app)
    if violations:
        raise ScenarioConstraintError("default-configuration-valid", "; ".join(violations))
    return cfg


def _parse_spies(doc: Mapping[str, Any], app: Application) -> Tuple[SpyAgent, ...]:
    spies: List[SpyAgent] = []
    seen = set()
    for i, s in enumerate(_list(doc.get("spies", []), "spies")):
        path = f"spies[{i}]"
        s = _obj(s, path)
        sid = _str(_req(s, "id", path), f"{path}.id")
        if sid in seen:
            raise ScenarioConstraintError("unique-spy-id", f"duplicate spy id '{sid}'")
        seen.add(sid)
        slot = _str(_req(s, "slot", path), f"{path}.slot")
        if slot not in app.slots:
            raise ScenarioReferenceError(slot, f"spy '{sid}' slot")
        char = _str(_req(s, "characteristic", path), f"{path}.characteristic")
        if char not in app.characteristics:
            raise ScenarioReferenceError(char, f"spy '{sid}' characteristic")
        marks = {str(k): _num(v, f"{path}.marks.{k}") for k, v in _obj(_req(s, "marks", path), f"{path}.marks").items()}
        variant_marks = {}
        for k, v in _obj(s.get("variant_marks", {}), f"{path}.variant_marks").items():
            if k not in app.variants:
                raise ScenarioReferenceError(k, f"spy '{sid}' variant")
            variant_marks[k] = _num(v, f"{path}.variant_marks.{k}")
        default_mark = _num(_req(s, "default_mark", path), f"{path}.default_mark")
        for m in list(marks.values()) + list(variant_marks.values()) + [default_mark]:
            if not 0.0 <= m <= 1.0:
                raise ScenarioConstraintError("mark-range", f"spy '{sid}' mark {m} outside [0,1]")
        spies.append(SpyAgent(
            id=sid, slot=slot, watch=_str(_req(s, "watch", path), f"{path}.watch"), characteristic=char,
            marks=marks, default_mark=default_mark, variant_marks=variant_marks,
        ))
    return tuple(spies)


def _parse_context(doc: Mapping[str, Any], app: Application) -> Tuple[ContextEvent, ...]:
    events: List[ContextEvent] = []
    for i, e in enumerate(_list(doc.get("context_events", []), "context_events")):
        path = f"context_events[{i}]"
        e = _obj(e, path)
        at = _int(_req(e, "at", path), f"{path}.at")
        if at < 0:
            raise ScenarioConstraintError("context-at-non-negative", f"{path}.at < 0")
        action = _str(_req(e, "action", path), f"{path}.action")
        if action not in CONTEXT_ACTIONS:
            raise ScenarioConstraintError("context-action", f"{path}: unknown action '{action}'")
        target = _str(_req(e, "target", path), f"{path}.target")
        raw_value = _req(e, "value", path)
        if action == SET_ENVIRONMENT:
            value: Any = _str(raw_value, f"{path}.value")
        else:
            known = app.stations if action == SET_STATION_LOAD else app.links
            if target not in known:
                raise ScenarioReferenceError(target, f"context event {action}")
            value = _num(raw_value, f"{path}.value")
            if value < 0:
                raise ScenarioConstraintError("context-value-non-negative", f"{path}.value < 0")
        events.append(ContextEvent(at=at, action=action, target=target, value=value))
    return tuple(events)


_INT_PARAMS = {"dt_ms", "action_latency_ms", "horizon_ms", "seed", "k_adjacent", "brute_force_cap", "stage_budget", "ring_radius"}


def _parse_params(doc: Mapping[str, Any], base: SimulationParams) -> SimulationParams:
    raw = _obj(doc.get("parameters", {}), "parameters")
    values: Dict[str, Any] = {}
    for k, v in raw.items():
        path = f"parameters.{k}"
        if k == "point_thresholds":
            values[k] = {str(p): _num(t, f"{path}.{p}") for p, t in _obj(v, path).items()}
        elif k in ("stage_budget", "ring_radius") and v is None:
            values[k] = None
        elif k in _INT_PARAMS:
            values[k] = _int(v, path)
        else:
            values[k] = _num(v, path)
    try:
        params = base.with_overrides(values)
    except KeyError as e:
        raise ScenarioConstraintError("known-parameter", str(e.args[0])) from e
    if params.horizon_ms <= 0:
        raise ScenarioConstraintError("horizon-positive", "horizon_ms must be > 0")
    if params.dt_ms <= 0:
        raise ScenarioConstraintError("dt-positive", "dt_ms must be > 0")
    for name in ("eps_intrinsic", "eps_contextual", "delta", "event_threshold"):
        if getattr(params, name) < 0:
            raise ScenarioConstraintError("parameter-non-negative", f"{name} must be >= 0")
    return params


def _check_measured(app: Application, user: UserProfile, spies: Sequence[SpyAgent]) -> None:
    measured = measured_characteristics(app, spies)
    for sg_id in sorted(app.subgroups):
        for ch in app.subgroups[sg_id].characteristics:
            if app.characteristics[ch].kind != CONTEXTUAL or user.wish(ch) is None:
                continue
            if ch not in measured[sg_id]:
                raise ScenarioConstraintError(
                    "contextual-characteristic-measured",
                    f"sub-group '{sg_id}' lists '{ch}' but no flow, source value or spy produces it there",
                )


def parse_document(doc: Any, base_params: Optional[SimulationParams] = None) -> ScenarioFile:
    doc = _obj(doc, "$")
    app = _parse_application(doc)
    user = _parse_user(doc, app)
    default = _parse_default(doc, app)
    spies = _parse_spies(doc, app)
    _check_measured(app, user, spies)
    environment = {str(k): _str(v, f"environment.{k}") for k, v in _obj(doc.get("environment", {}), "environment").items()}
    events = _parse_context(doc, app)
    params = _parse_params(doc, base_params or default_params())
    return ScenarioFile(
        name=str(doc.get("name", app.name)),
        app=app,
        user=user,
        default=default,
        spies=spies,
        environment=environment,
        context_events=events,
        params=params,
        description=str(doc.get("description", "")),
    )


def parse_scenario(text: str, base_params: Optional[SimulationParams] = None) -> ScenarioFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioSyntaxError(e.msg, e.lineno, e.colno) from e
    return parse_document(doc, base_params)


def load_scenario(path: Path, base_params: Optional[SimulationParams] = None) -> ScenarioFile:
    return parse_scenario(Path(path).read_text(encoding="utf-8"), base_params)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------
def _rule_doc(rule: TransferRule) -> Dict[str, Any]:
    return {"a": rule.a, "b": rule.b, "lo": rule.lo, "hi": rule.hi, "scaled": rule.scaled}


def scenario_to_document(sf: ScenarioFile) -> Dict[str, Any]:
    app = sf.app
    groups = []
    for g_id in sorted(app.groups):
        subgroups = []
        for sg_id in app.groups[g_id].subgroups:
            sg = app.subgroups[sg_id]
            slots = []
            for slot_id in sg.slots:
                slot = app.slots[slot_id]
                variants = []
                for v_id in slot.admissible_variants:
                    v = app.variants[v_id]
                    variants.append({
                        "id": v.id,
                        "power_rank": v.power_rank,
                        "cpu_demand": v.cpu_demand,
                        "description": v.description,
                        "intrinsic_contribution": dict(v.intrinsic_contribution),
                        "transfer": {p: {c: _rule_doc(r) for c, r in rules.items()} for p, rules in v.transfer.rules.items()},
                    })
                entry: Dict[str, Any] = {
                    "id": slot.id,
                    "input_ports": list(slot.input_ports),
                    "output_ports": list(slot.output_ports),
                    "variants": variants,
                }
                if slot.admissible_stations is not None:
                    entry["admissible_stations"] = list(slot.admissible_stations)
                slots.append(entry)
            conducts = []
            for c_id in sg.conducts:
                c = app.conducts[c_id]
                conducts.append({
                    "id": c.id,
                    "source": f"{c.source[0]}.{c.source[1]}",
                    "sink": f"{c.sink[0]}.{c.sink[1]}",
                    "required_characteristics": list(c.required_characteristics),
                    "loopback": c.loopback,
                })
            subgroups.append({"id": sg.id, "characteristics": list(sg.characteristics), "slots": slots, "conducts": conducts})
        groups.append({"id": g_id, "subgroups": subgroups})

    return {
        "schema": SCHEMA_VERSION,
        "name": sf.name,
        "description": sf.description,
        "application": {
            "name": app.name,
            "characteristics": [
                {
                    "id": c.id, "kind": c.kind, "unit": c.unit, "description": c.description,
                    "higher_is_better": c.higher_is_better, "flow_role": c.flow_role,
                }
                for c in (app.characteristics[k] for k in sorted(app.characteristics))
            ],
            "groups": groups,
            "stations": [
                {"id": s.id, "capacity": s.capacity, "base_load": s.base_load}
                for s in (app.stations[k] for k in sorted(app.stations))
            ],
            "links": [
                {"id": l.id, "endpoints": list(l.endpoints), "bandwidth": l.bandwidth, "latency": l.latency}
                for l in (app.links[k] for k in sorted(app.links))
            ],
            "source_values": dict(app.source_values),
        },
        "user": {
            "wishes": [
                {"characteristic": w.characteristic, "breakpoints": [list(bp) for bp in w.breakpoints], "weight": w.weight}
                for w in (sf.user.wishes[k] for k in sorted(sf.user.wishes))
            ],
            "subgroup_weights": dict(sf.user.subgroup_weights),
            "group_weights": dict(sf.user.group_weights),
        },
        "default_configuration": sf.default.to_dict(),
        "spies": [
            {
                "id": s.id, "slot": s.slot, "watch": s.watch, "characteristic": s.characteristic,
                "marks": dict(s.marks), "default_mark": s.default_mark, "variant_marks": dict(s.variant_marks),
            }
            for s in sf.spies
        ],
        "environment": dict(sf.environment),
        "context_events": [e.to_dict() for e in sf.context_events],
        "parameters": sf.params.to_dict(),
    }


def serialize_scenario(sf: ScenarioFile) -> str:
    return json.dumps(scenario_to_document(sf), indent=2, sort_keys=True) + "\n"
