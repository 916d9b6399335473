"""
app_model.py

What this file does:
  - Describes the application: Groups, Sub-Groups, slots (Elementary Processors)
    with their admissible component variants, Conducts, stations and links
  - Describes a Configuration (slot -> (variant, station), conduct -> route)
  - Enumerates the configuration space, scores the context-free intrinsic mark
    and partitions configurations into families

This file does NOT:
  - Simulate flows or load (context_engine)
  - Decide which configuration to run (heuristic_search)

Routes: a station pair is served by its direct link(s) plus, when it is
different, the latency-shortest path over the static link table.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import networkx as nx

from .errors import AllWeightsZero, BudgetExceeded, CyclicTopology, EmptySpace, UnknownCulprit
from .qos_model import (
    CONTEXTUAL,
    INTRINSIC,
    MARK_TOL,
    Characteristic,
    UserProfile,
    aggregate_criterion,
    evaluate_hierarchy,
)

Route = Tuple[str, ...]
PlacementPair = Tuple[str, str]  # (variant id, station id)


# ---------------------------------------------------------------------------
# Transfer rules
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class TransferRule:
    """value_out = clamp(scale(a * value_in + b), lo, hi)"""

    a: float = 1.0
    b: float = 0.0
    lo: float = 0.0
    hi: float = 1e12
    scaled: bool = False

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("transfer clamp bounds must be finite")
        if self.lo > self.hi:
            raise ValueError(f"transfer clamp lo {self.lo} > hi {self.hi}")

    def apply(self, value: float, resource_factor: float = 1.0, higher_is_better: bool = True) -> float:
        v = self.a * value + self.b
        if self.scaled and resource_factor < 1.0:
            v = v * resource_factor if higher_is_better else v / resource_factor
        return min(self.hi, max(self.lo, v))


IDENTITY_RULE = TransferRule(a=1.0, b=0.0, lo=-1e12, hi=1e12, scaled=False)


@dataclass(frozen=True)
class TransferFunction:
    # output port -> characteristic -> rule; a missing rule is the identity
    rules: Mapping[str, Mapping[str, TransferRule]] = field(default_factory=dict)

    def rule_for(self, port: str, characteristic: str) -> TransferRule:
        return self.rules.get(port, {}).get(characteristic, IDENTITY_RULE)

    def characteristics_for(self, port: str) -> Tuple[str, ...]:
        return tuple(sorted(self.rules.get(port, {})))


# ---------------------------------------------------------------------------
# Structure
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ComponentVariant:
    id: str
    slot: str
    intrinsic_contribution: Mapping[str, float] = field(default_factory=dict)
    transfer: TransferFunction = field(default_factory=TransferFunction)
    cpu_demand: float = 0.0
    power_rank: int = 0
    description: str = ""


@dataclass(frozen=True)
class ProcessorSlot:
    id: str
    subgroup: str
    admissible_variants: Tuple[str, ...]
    input_ports: Tuple[str, ...] = ("in",)
    output_ports: Tuple[str, ...] = ("out",)
    # None means every station of the application
    admissible_stations: Optional[Tuple[str, ...]] = None


@dataclass(frozen=True)
class Conduct:
    id: str
    source: Tuple[str, str]  # (slot id, output port)
    sink: Tuple[str, str]  # (slot id, input port)
    required_characteristics: Tuple[str, ...] = ()
    loopback: bool = False

    @property
    def source_slot(self) -> str:
        return self.source[0]

    @property
    def sink_slot(self) -> str:
        return self.sink[0]


@dataclass(frozen=True)
class SubGroup:
    id: str
    group: str
    slots: Tuple[str, ...]
    conducts: Tuple[str, ...] = ()
    characteristics: Tuple[str, ...] = ()


@dataclass(frozen=True)
class Group:
    id: str
    subgroups: Tuple[str, ...]


@dataclass(frozen=True)
class Station:
    id: str
    capacity: float
    base_load: float = 0.0


@dataclass(frozen=True)
class Link:
    id: str
    endpoints: Tuple[str, str]
    bandwidth: float
    latency: float

    def other(self, station: str) -> Optional[str]:
        a, b = self.endpoints
        if station == a:
            return b
        if station == b:
            return a
        return None


@dataclass(frozen=True)
class Application:
    name: str
    characteristics: Dict[str, Characteristic]
    groups: Dict[str, Group]
    subgroups: Dict[str, SubGroup]
    slots: Dict[str, ProcessorSlot]
    variants: Dict[str, ComponentVariant]
    conducts: Dict[str, Conduct]
    stations: Dict[str, Station]
    links: Dict[str, Link]
    source_values: Dict[str, float] = field(default_factory=dict)
    _cache: Dict[object, object] = field(default_factory=dict, compare=False, repr=False)

    def slot_ids(self) -> List[str]:
        return sorted(self.slots)

    def conduct_ids(self) -> List[str]:
        return sorted(self.conducts)

    def variants_for(self, slot: str) -> List[str]:
        return sorted(self.slots[slot].admissible_variants)

    def stations_for(self, slot: str) -> List[str]:
        pinned = self.slots[slot].admissible_stations
        if pinned is None:
            return sorted(self.stations)
        return sorted(s for s in pinned if s in self.stations)

    def placement_options(self, slot: str) -> List[PlacementPair]:
        return [(v, s) for v in self.variants_for(slot) for s in self.stations_for(slot)]

    def incident_conducts(self, slot: str) -> List[str]:
        return sorted(
            c.id for c in self.conducts.values() if c.source_slot == slot or c.sink_slot == slot
        )

    def incoming(self, slot: str) -> List[Conduct]:
        return [self.conducts[c] for c in self.conduct_ids()
                if self.conducts[c].sink_slot == slot and not self.conducts[c].loopback]

    def outgoing(self, slot: str) -> List[Conduct]:
        return [self.conducts[c] for c in self.conduct_ids() if self.conducts[c].source_slot == slot]

    def subgroup_of_conduct(self, conduct: str) -> str:
        for sg_id in sorted(self.subgroups):
            if conduct in self.subgroups[sg_id].conducts:
                return sg_id
        return self.slots[self.conducts[conduct].source_slot].subgroup

    def slot_order(self) -> List[str]:
        """Slots in deterministic topological order along non-loopback conducts."""
        key = "slot_order"
        if key not in self._cache:
            g = nx.DiGraph()
            g.add_nodes_from(self.slot_ids())
            for c in self.conducts.values():
                if not c.loopback:
                    g.add_edge(c.source_slot, c.sink_slot)
            if not nx.is_directed_acyclic_graph(g):
                cycle = nx.find_cycle(g)
                raise CyclicTopology(f"conduct graph has a cycle: {cycle}")
            self._cache[key] = list(nx.lexicographical_topological_sort(g))
        return list(self._cache[key])  # type: ignore[arg-type]

    def network(self) -> nx.Graph:
        key = "network"
        if key not in self._cache:
            g = nx.Graph()
            g.add_nodes_from(sorted(self.stations))
            for link in sorted(self.links.values(), key=lambda l: (l.latency, l.id)):
                a, b = link.endpoints
                if not g.has_edge(a, b):
                    g.add_edge(a, b, latency=link.latency, link=link.id)
            self._cache[key] = g
        return self._cache[key]  # type: ignore[return-value]

    def route_options(self, src: str, dst: str) -> List[Route]:
        if src == dst:
            return [()]
        key = ("route", src, dst)
        if key not in self._cache:
            direct = sorted(l.id for l in self.links.values() if set(l.endpoints) == {src, dst})
            options: List[Route] = [(lid,) for lid in direct]
            g = self.network()
            try:
                path = nx.shortest_path(g, src, dst, weight="latency")
            except (nx.NetworkXNoPath, nx.NodeNotFound):
                path = None
            if path is not None and len(path) > 2:
                hops = tuple(g.edges[u, v]["link"] for u, v in zip(path, path[1:]))
                options.append(hops)
            self._cache[key] = options
        return list(self._cache[key])  # type: ignore[arg-type]


# ---------------------------------------------------------------------------
# Configurations and families
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Configuration:
    # (slot, variant, station) sorted by slot
    placement: Tuple[Tuple[str, str, str], ...]
    # (conduct, route) sorted by conduct
    routes: Tuple[Tuple[str, Route], ...]

    @classmethod
    def build(
        cls,
        placement: Mapping[str, PlacementPair],
        routes: Optional[Mapping[str, Sequence[str]]] = None,
    ) -> "Configuration":
        return cls(
            placement=tuple((s, v, st) for s, (v, st) in sorted(placement.items())),
            routes=tuple((c, tuple(r)) for c, r in sorted((routes or {}).items())),
        )

    @cached_property
    def placement_map(self) -> Dict[str, PlacementPair]:
        return {s: (v, st) for s, v, st in self.placement}

    @cached_property
    def route_map(self) -> Dict[str, Route]:
        return dict(self.routes)

    def variant_of(self, slot: str) -> str:
        return self.placement_map[slot][0]

    def station_of(self, slot: str) -> str:
        return self.placement_map[slot][1]

    def route_of(self, conduct: str) -> Route:
        return self.route_map.get(conduct, ())

    def stations_used(self) -> List[str]:
        return sorted({st for _, _, st in self.placement})

    @cached_property
    def key(self) -> str:
        slots = ";".join(f"{s}={v}@{st}" for s, v, st in self.placement)
        routes = ";".join(f"{c}={'+'.join(r)}" for c, r in self.routes)
        return f"{slots}|{routes}"

    @cached_property
    def config_id(self) -> str:
        return hashlib.sha1(self.key.encode("utf-8")).hexdigest()[:10]

    def with_changes(
        self,
        placement: Optional[Mapping[str, PlacementPair]] = None,
        routes: Optional[Mapping[str, Sequence[str]]] = None,
    ) -> "Configuration":
        p = dict(self.placement_map)
        p.update(placement or {})
        r = dict(self.route_map)
        r.update({c: tuple(v) for c, v in (routes or {}).items()})
        return Configuration.build(p, r)

    def to_dict(self) -> Dict[str, object]:
        return {
            "placement": {s: {"variant": v, "station": st} for s, v, st in self.placement},
            "routes": {c: list(r) for c, r in self.routes},
        }


@dataclass(frozen=True)
class Family:
    intrinsic_mark: float
    members: Tuple[Configuration, ...]


def validate_configuration(cfg: Configuration, app: Application) -> List[str]:
    """Every invariant violation of cfg against app; an empty list means valid."""
    violations: List[str] = []
    placement = cfg.placement_map
    for slot in sorted(set(placement) - set(app.slots)):
        violations.append(f"unknown slot '{slot}'")
    for slot in app.slot_ids():
        if slot not in placement:
            violations.append(f"missing slot '{slot}'")
            continue
        variant, station = placement[slot]
        if variant not in app.slots[slot].admissible_variants or variant not in app.variants:
            violations.append(f"inadmissible variant '{variant}' for slot '{slot}'")
        if station not in app.stations:
            violations.append(f"unknown station '{station}' for slot '{slot}'")
        elif station not in app.stations_for(slot):
            violations.append(f"inadmissible station '{station}' for slot '{slot}'")

    routes = cfg.route_map
    for conduct in sorted(set(routes) - set(app.conducts)):
        violations.append(f"unknown conduct '{conduct}'")
    for cid in app.conduct_ids():
        c = app.conducts[cid]
        if cid not in routes:
            violations.append(f"missing route for conduct '{cid}'")
            continue
        route = routes[cid]
        unknown = [l for l in route if l not in app.links]
        if unknown:
            violations.extend(f"unknown link '{l}' in route of '{cid}'" for l in unknown)
            continue
        if c.source_slot not in placement or c.sink_slot not in placement:
            continue
        here = placement[c.source_slot][1]
        there = placement[c.sink_slot][1]
        if here not in app.stations or there not in app.stations:
            continue
        ok = True
        for lid in route:
            nxt = app.links[lid].other(here)
            if nxt is None:
                ok = False
                break
            here = nxt
        if not ok or here != there:
            violations.append(f"disconnected route for conduct '{cid}'")
    return violations


def _route_choices(app: Application, placement: Mapping[str, PlacementPair], conducts: Sequence[str]) -> List[List[Route]]:
    out = []
    for cid in conducts:
        c = app.conducts[cid]
        out.append(app.route_options(placement[c.source_slot][1], placement[c.sink_slot][1]))
    return out


def configurations_for(
    app: Application,
    base: Configuration,
    slots: Sequence[str],
    options: Sequence[Sequence[PlacementPair]],
) -> Iterator[Configuration]:
    """Configurations equal to base except on `slots`, which take every combination
    of `options`; routes of conducts touching a changed slot take every option."""
    touched = sorted({c for s in slots for c in app.incident_conducts(s)})
    for combo in itertools.product(*options):
        placement = dict(base.placement_map)
        placement.update(zip(slots, combo))
        moved = [c for c in touched if _hosts(app, placement, c) != _hosts(app, base.placement_map, c)]
        if not moved:
            yield base.with_changes(placement=dict(zip(slots, combo)))
            continue
        for routes in itertools.product(*_route_choices(app, placement, moved)):
            yield base.with_changes(placement=dict(zip(slots, combo)), routes=dict(zip(moved, routes)))


def _hosts(app: Application, placement: Mapping[str, PlacementPair], conduct: str) -> Tuple[str, str]:
    c = app.conducts[conduct]
    return placement[c.source_slot][1], placement[c.sink_slot][1]


def enumerate_configurations(app: Application) -> Iterator[Configuration]:
    """Every valid configuration once, lexicographic by slot, variant, station, then route."""
    slots = app.slot_ids()
    for s in slots:
        if not app.slots[s].admissible_variants:
            raise EmptySpace(f"slot '{s}' has no admissible variant")
    if not app.stations:
        raise EmptySpace("application has no station")
    conducts = app.conduct_ids()
    options = [app.placement_options(s) for s in slots]
    for combo in itertools.product(*options):
        placement = dict(zip(slots, combo))
        for routes in itertools.product(*_route_choices(app, placement, conducts)):
            yield Configuration.build(placement, dict(zip(conducts, routes)))


def placement_space_size(app: Application) -> int:
    return math.prod(len(app.placement_options(s)) for s in app.slot_ids())


def intrinsic_characteristic_marks(cfg: Configuration, app: Application) -> Dict[Tuple[str, str], float]:
    """(sub-group, intrinsic characteristic) -> worst contribution of the chosen variants."""
    marks: Dict[Tuple[str, str], float] = {}
    for sg_id in sorted(app.subgroups):
        sg = app.subgroups[sg_id]
        for char_id in sg.characteristics:
            char = app.characteristics.get(char_id)
            if char is None or char.kind != INTRINSIC:
                continue
            vals = [
                app.variants[cfg.variant_of(s)].intrinsic_contribution[char_id]
                for s in sg.slots
                if char_id in app.variants[cfg.variant_of(s)].intrinsic_contribution
            ]
            marks[(sg_id, char_id)] = min(vals) if vals else 1.0
    return marks


def intrinsic_mark_of(cfg: Configuration, app: Application, user: UserProfile) -> float:
    marks = intrinsic_characteristic_marks(cfg, app)
    for sg_id, sg in app.subgroups.items():
        for char_id in sg.characteristics:
            char = app.characteristics.get(char_id)
            if char is not None and char.kind == CONTEXTUAL:
                marks[(sg_id, char_id)] = 1.0
    return evaluate_hierarchy(app, marks, user).application.intrinsic


def partition_into_families(
    configs: Sequence[Configuration],
    app: Application,
    user: UserProfile,
    eps_intrinsic: float,
) -> List[Family]:
    scored = [(intrinsic_mark_of(c, app, user), i, c) for i, c in enumerate(configs)]
    scored.sort(key=lambda t: (-t[0], t[1]))
    founders: List[float] = []
    members: List[List[Configuration]] = []
    for mark, _, cfg in scored:
        for idx, founder in enumerate(founders):
            if founder - mark <= eps_intrinsic + MARK_TOL:
                members[idx].append(cfg)
                break
        else:
            founders.append(mark)
            members.append([cfg])
    return [Family(intrinsic_mark=f, members=tuple(m)) for f, m in zip(founders, members)]


def culprit_neighbors(cfg: Configuration, culprit: str, app: Application) -> List[Configuration]:
    if culprit in app.slots:
        current = cfg.placement_map[culprit]
        options = [p for p in app.placement_options(culprit) if p != current]
        return list(configurations_for(app, cfg, [culprit], [options]))
    if culprit in app.conducts:
        src, dst = _hosts(app, cfg.placement_map, culprit)
        return [
            cfg.with_changes(routes={culprit: r})
            for r in app.route_options(src, dst)
            if r != cfg.route_of(culprit)
        ]
    raise UnknownCulprit(f"unknown culprit '{culprit}'")


# ---------------------------------------------------------------------------
# Family index: family boundaries without enumerating placements
# ---------------------------------------------------------------------------
def _subgroup_intrinsic_levels(app: Application, sg_id: str, user: UserProfile, cap: int) -> List[float]:
    sg = app.subgroups[sg_id]
    chars = [
        c for c in sg.characteristics
        if c in app.characteristics and app.characteristics[c].kind == INTRINSIC and user.wish(c) is not None
    ]
    if not chars:
        return [1.0]
    slot_variants = [app.variants_for(s) for s in sorted(sg.slots)]
    if math.prod(len(v) for v in slot_variants) > cap:
        raise BudgetExceeded(f"sub-group '{sg_id}' variant space exceeds {cap}")
    levels = set()
    for choice in itertools.product(*slot_variants):
        contributions = [app.variants[v].intrinsic_contribution for v in choice]
        pairs = []
        for c in chars:
            vals = [contrib[c] for contrib in contributions if c in contrib]
            pairs.append((min(vals) if vals else 1.0, user.weight_of(c)))
        levels.add(round(aggregate_criterion(pairs), 12))
    return sorted(levels)


@dataclass(frozen=True)
class FamilyIndex:
    """Distinct application intrinsic marks, descending, and their greedy families."""

    levels: Tuple[float, ...]
    founders: Tuple[float, ...]
    eps: float

    @classmethod
    def build(cls, app: Application, user: UserProfile, eps: float, level_cap: int = 200_000) -> "FamilyIndex":
        sums = {0.0}
        group_ids = sorted(app.groups)
        gw_total = sum(user.group_weight(g) for g in group_ids)
        if group_ids and gw_total <= 0:
            raise AllWeightsZero("all group weights are zero")
        if not group_ids:
            sums = {1.0}
        for g_id in group_ids:
            g_share = user.group_weight(g_id) / gw_total
            subgroups = list(app.groups[g_id].subgroups)
            if not subgroups:
                sums = {round(s + g_share, 12) for s in sums}
                continue
            sw_total = sum(user.subgroup_weight(s) for s in subgroups)
            if sw_total <= 0:
                raise AllWeightsZero(f"all sub-group weights of group '{g_id}' are zero")
            for sg_id in subgroups:
                share = g_share * user.subgroup_weight(sg_id) / sw_total
                levels = _subgroup_intrinsic_levels(app, sg_id, user, level_cap)
                sums = {round(s + share * lv, 12) for s in sums for lv in levels}
                if len(sums) > level_cap:
                    raise BudgetExceeded(f"more than {level_cap} distinct intrinsic levels")
        levels = tuple(sorted((min(1.0, max(0.0, s)) for s in sums), reverse=True))
        founders: List[float] = []
        for lv in levels:
            if not founders or founders[-1] - lv > eps + MARK_TOL:
                founders.append(lv)
        return cls(levels=levels, founders=tuple(founders), eps=eps)

    def family_of(self, mark: float) -> int:
        for idx, founder in enumerate(self.founders):
            if founder - mark <= self.eps + MARK_TOL:
                return idx
        return len(self.founders) - 1

    def index_mark(self, family: int) -> float:
        return self.founders[family]

    def nearest(self, family: int, k: int) -> List[int]:
        """Up to k families above and k below, closest intrinsic mark first (higher wins ties)."""
        above = [i for i in range(family - 1, family - 1 - k, -1) if i >= 0]
        below = [i for i in range(family + 1, family + 1 + k) if i < len(self.founders)]
        here = self.founders[family]
        return sorted(above + below, key=lambda i: (round(abs(self.founders[i] - here), 12), -self.founders[i]))
