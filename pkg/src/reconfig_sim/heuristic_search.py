"""
heuristic_search.py

What this file does:
  - Predicts the QoS a configuration would have under a context snapshot
  - Searches for a better configuration in four stages, stopping at the first
    stage holding an improvement beyond the hysteresis delta:
        1. culprit neighbours inside the current family
        2. the whole current family
        3. the k nearest families on each side, closest intrinsic mark first
        4. the culprit's Sub-Group re-chosen freely, the rest fixed
  - Provides the exhaustive oracle, also used as the "exhaustive" policy

This file does NOT:
  - Commit anything; plans are values the runtime may or may not apply

Ranking inside a stage: predicted overall QoS desc, fewest actions, configuration key.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from .app_model import (
    Application,
    Configuration,
    FamilyIndex,
    PlacementPair,
    Route,
    configurations_for,
    culprit_neighbors,
    enumerate_configurations,
    intrinsic_mark_of,
    placement_space_size,
)
from .config import SimulationParams
from .context_engine import ContextState, SpyAgent, evaluate_configuration
from .errors import BudgetExceeded, EmptySpace
from .event_manager import DEGRADATION, ReconfigurationEvent
from .qos_model import MARK_TOL, CriterionMarks, UserProfile, entity_qos, service_proximity

logger = logging.getLogger(__name__)

STAGE_CULPRIT = "culprit_same_family"
STAGE_FAMILY = "whole_family"
STAGE_ADJACENT = "adjacent_family"
STAGE_SUBGROUP = "subgroup_redeploy"
STAGE_EXHAUSTIVE = "exhaustive"
STAGES = (STAGE_CULPRIT, STAGE_FAMILY, STAGE_ADJACENT, STAGE_SUBGROUP)

REPLACE = "replace"
MOVE = "move"
REROUTE = "reroute"
ADD = "add"
REMOVE = "remove"
ACTION_KINDS = (REPLACE, MOVE, REROUTE, ADD, REMOVE)


@dataclass(frozen=True)
class Action:
    kind: str
    target: str
    variant: Optional[str] = None
    station: Optional[str] = None
    route: Optional[Route] = None

    def to_dict(self) -> Dict[str, object]:
        d: Dict[str, object] = {"kind": self.kind, "target": self.target}
        if self.variant is not None:
            d["variant"] = self.variant
        if self.station is not None:
            d["station"] = self.station
        if self.route is not None:
            d["route"] = list(self.route)
        return d


def _default_route(app: Application, placement: Mapping[str, PlacementPair], conduct: str) -> Route:
    c = app.conducts[conduct]
    options = app.route_options(placement[c.source_slot][1], placement[c.sink_slot][1])
    return options[0] if options else ()


def _endpoint_moved(app: Application, a: Mapping[str, PlacementPair], b: Mapping[str, PlacementPair], conduct: str) -> bool:
    c = app.conducts[conduct]
    ends = (c.source_slot, c.sink_slot)
    if not all(s in a and s in b for s in ends):
        return False
    return any(a[s][1] != b[s][1] for s in ends)


def diff_actions(base: Configuration, target: Configuration, app: Optional[Application] = None) -> Tuple[Action, ...]:
    """
    Actions turning base into target. With an application, a move carries the
    slot's conducts onto the default route of their new host pair, so a reroute
    is only listed when target chose another route.
    """
    actions: List[Action] = []
    a, b = base.placement_map, target.placement_map
    for slot in sorted(set(a) | set(b)):
        if slot not in b:
            actions.append(Action(REMOVE, slot))
        elif slot not in a:
            actions.append(Action(ADD, slot, variant=b[slot][0], station=b[slot][1]))
        else:
            if a[slot][0] != b[slot][0]:
                actions.append(Action(REPLACE, slot, variant=b[slot][0]))
            if a[slot][1] != b[slot][1]:
                actions.append(Action(MOVE, slot, station=b[slot][1]))
    ra, rb = base.route_map, target.route_map
    for conduct in sorted(set(ra) | set(rb)):
        implied = ra.get(conduct)
        if app is not None and conduct in app.conducts and _endpoint_moved(app, a, b, conduct):
            implied = _default_route(app, b, conduct)
        if rb.get(conduct) != implied:
            actions.append(Action(REROUTE, conduct, route=rb.get(conduct, ())))
    return tuple(actions)


def apply_actions(cfg: Configuration, actions: Sequence[Action], app: Optional[Application] = None) -> Configuration:
    before = cfg.placement_map
    placement = dict(before)
    routes = dict(cfg.route_map)
    rerouted = set()
    for act in actions:
        if act.kind == REPLACE:
            placement[act.target] = (act.variant, placement[act.target][1])  # type: ignore[assignment]
        elif act.kind == MOVE:
            placement[act.target] = (placement[act.target][0], act.station)  # type: ignore[assignment]
        elif act.kind == REROUTE:
            routes[act.target] = tuple(act.route or ())
            rerouted.add(act.target)
        elif act.kind == ADD:
            placement[act.target] = (act.variant, act.station)  # type: ignore[assignment]
        elif act.kind == REMOVE:
            placement.pop(act.target, None)
        else:
            raise ValueError(f"unknown action kind '{act.kind}'")
    if app is not None:
        for cid in app.conduct_ids():
            if cid not in rerouted and _endpoint_moved(app, before, placement, cid):
                routes[cid] = _default_route(app, placement, cid)
    return Configuration.build(placement, routes)


@dataclass(frozen=True)
class ReconfigurationPlan:
    base: Configuration
    target: Configuration
    actions: Tuple[Action, ...]
    predicted: CriterionMarks
    stage: str
    proximate: bool = True
    event_id: Optional[int] = None

    @property
    def overall(self) -> float:
        return entity_qos(self.predicted)

    def to_dict(self) -> Dict[str, object]:
        return {
            "event_id": self.event_id,
            "stage": self.stage,
            "base": self.base.config_id,
            "target": self.target.config_id,
            "actions": [a.to_dict() for a in self.actions],
            "predicted": self.predicted.to_dict(),
            "overall": self.overall,
            "proximate": self.proximate,
        }


@dataclass
class SearchBudget:
    candidates_evaluated: int = 0
    stage_reached: str = ""
    truncated: bool = False
    elapsed_s: float = 0.0
    per_stage: Dict[str, int] = field(default_factory=dict)

    def count(self, stage: str) -> None:
        self.candidates_evaluated += 1
        self.per_stage[stage] = self.per_stage.get(stage, 0) + 1

    def to_dict(self) -> Dict[str, object]:
        return {
            "candidates_evaluated": self.candidates_evaluated,
            "stage_reached": self.stage_reached,
            "truncated": self.truncated,
            "per_stage": dict(sorted(self.per_stage.items())),
        }


def predict_qos(
    cfg: Configuration,
    app: Application,
    state: ContextState,
    user: UserProfile,
    spies: Sequence[SpyAgent] = (),
) -> CriterionMarks:
    return evaluate_configuration(cfg, app, state, user, spies).application


class _Evaluator:
    """Per-search memo of predictions and intrinsic marks."""

    def __init__(self, app, state, user, spies, budget: SearchBudget) -> None:
        self.app = app
        self.state = state
        self.user = user
        self.spies = spies
        self.budget = budget
        self._marks: Dict[Configuration, CriterionMarks] = {}
        self._intrinsic: Dict[Tuple[str, ...], float] = {}

    def marks(self, cfg: Configuration, stage: str) -> CriterionMarks:
        got = self._marks.get(cfg)
        if got is None:
            got = predict_qos(cfg, self.app, self.state, self.user, self.spies)
            self._marks[cfg] = got
            self.budget.count(stage)
        return got

    def intrinsic(self, cfg: Configuration) -> float:
        key = tuple(v for _, v, _ in cfg.placement)
        got = self._intrinsic.get(key)
        if got is None:
            got = intrinsic_mark_of(cfg, self.app, self.user)
            self._intrinsic[key] = got
        return got


def ring_walk(app: Application, base: Configuration, radius: Optional[int]) -> Iterator[Configuration]:
    """Configurations by growing number of re-placed slots; radius None walks the whole space."""
    if radius is None:
        yield from enumerate_configurations(app)
        return
    slots = app.slot_ids()
    yield base
    for cid in app.conduct_ids():
        c = app.conducts[cid]
        src, dst = base.station_of(c.source_slot), base.station_of(c.sink_slot)
        for r in app.route_options(src, dst):
            if r != base.route_of(cid):
                yield base.with_changes(routes={cid: r})
    for d in range(1, min(radius, len(slots)) + 1):
        for chosen in itertools.combinations(slots, d):
            options = [[p for p in app.placement_options(s) if p != base.placement_map[s]] for s in chosen]
            yield from configurations_for(app, base, list(chosen), options)


def _rank_key(cfg: Configuration, marks: CriterionMarks, base: Configuration, app: Application) -> Tuple[float, int, str]:
    return (-round(entity_qos(marks), 12), len(diff_actions(base, cfg, app)), cfg.key)


def _best(
    candidates: Iterable[Configuration],
    current: Configuration,
    threshold: float,
    ev: _Evaluator,
    stage: str,
    stage_budget: Optional[int],
) -> Optional[Tuple[Configuration, CriterionMarks]]:
    best: Optional[Tuple[Tuple[float, int, str], Configuration, CriterionMarks]] = None
    examined = 0
    for cfg in candidates:
        if cfg == current:
            continue
        if stage_budget is not None and examined >= stage_budget:
            ev.budget.truncated = True
            break
        examined += 1
        marks = ev.marks(cfg, stage)
        if entity_qos(marks) <= threshold + MARK_TOL:
            continue
        key = _rank_key(cfg, marks, current, ev.app)
        if best is None or key < best[0]:
            best = (key, cfg, marks)
    return None if best is None else (best[1], best[2])


def search_better_configuration(
    current: Configuration,
    ev: ReconfigurationEvent,
    app: Application,
    state: ContextState,
    user: UserProfile,
    params: Optional[SimulationParams] = None,
    *,
    spies: Sequence[SpyAgent] = (),
    budget: Optional[SearchBudget] = None,
    family_index: Optional[FamilyIndex] = None,
) -> Optional[ReconfigurationPlan]:
    params = params or SimulationParams()
    budget = budget if budget is not None else SearchBudget()
    started = time.perf_counter()
    evaluator = _Evaluator(app, state, user, spies, budget)
    index = family_index or FamilyIndex.build(app, user, params.eps_intrinsic)

    current_marks = evaluator.marks(current, STAGE_CULPRIT)
    threshold = entity_qos(current_marks) + params.delta
    home = index.family_of(evaluator.intrinsic(current))
    culprit = ev.culprit
    known = culprit in app.slots or culprit in app.conducts

    def in_family(family: int) -> Iterator[Configuration]:
        for cfg in ring_walk(app, current, params.ring_radius):
            if index.family_of(evaluator.intrinsic(cfg)) == family:
                yield cfg

    def finish(stage: str, found: Optional[Tuple[Configuration, CriterionMarks]]) -> Optional[ReconfigurationPlan]:
        budget.stage_reached = stage
        budget.elapsed_s = time.perf_counter() - started
        if found is None:
            return None
        target, marks = found
        plan = ReconfigurationPlan(
            base=current,
            target=target,
            actions=diff_actions(current, target, app),
            predicted=marks,
            stage=stage,
            proximate=service_proximity(current_marks, marks, params.eps_intrinsic, params.eps_contextual),
            event_id=ev.id,
        )
        logger.info(
            "event %s (%s): %s plan %.4f -> %.4f with %d action(s)",
            ev.id, culprit, stage, entity_qos(current_marks), plan.overall, len(plan.actions),
        )
        return plan

    # marks are capped at 1, nothing can clear the threshold
    if threshold + MARK_TOL >= 1.0:
        logger.debug("event %s (%s): current QoS %.4f already at the ceiling", ev.id, culprit, threshold - params.delta)
        return finish(STAGE_CULPRIT, None)

    # 1. culprit neighbours in the current family
    if known:
        neighbours = (
            c for c in culprit_neighbors(current, culprit, app)
            if index.family_of(evaluator.intrinsic(c)) == home
        )
        found = _best(neighbours, current, threshold, evaluator, STAGE_CULPRIT, params.stage_budget)
        if found:
            return finish(STAGE_CULPRIT, found)

    # 2. whole current family
    found = _best(in_family(home), current, threshold, evaluator, STAGE_FAMILY, params.stage_budget)
    if found:
        return finish(STAGE_FAMILY, found)

    # 3. nearest families, one walk, first family (in proximity order) holding an improvement
    order = index.nearest(home, params.k_adjacent)
    if order:
        wanted = set(order)
        buckets: Dict[int, List[Configuration]] = {f: [] for f in order}
        examined = 0
        for cfg in ring_walk(app, current, params.ring_radius):
            if params.stage_budget is not None and examined >= params.stage_budget:
                budget.truncated = True
                break
            fam = index.family_of(evaluator.intrinsic(cfg))
            if fam in wanted:
                buckets[fam].append(cfg)
                examined += 1
        for fam in order:
            found = _best(buckets[fam], current, threshold, evaluator, STAGE_ADJACENT, None)
            if found:
                return finish(STAGE_ADJACENT, found)

    # 4. re-choose the culprit's Sub-Group
    if known:
        sg_id = app.slots[culprit].subgroup if culprit in app.slots else app.subgroup_of_conduct(culprit)
        slots = sorted(app.subgroups[sg_id].slots)
        options = [app.placement_options(s) for s in slots]
        found = _best(configurations_for(app, current, slots, options), current, threshold,
                      evaluator, STAGE_SUBGROUP, params.stage_budget)
        if found:
            return finish(STAGE_SUBGROUP, found)

    logger.debug("event %s (%s): no improvement beyond %.3f", ev.id, culprit, params.delta)
    return finish(STAGE_SUBGROUP, None)


def brute_force_best(
    app: Application,
    state: ContextState,
    user: UserProfile,
    *,
    spies: Sequence[SpyAgent] = (),
    cap: int = 1_000_000,
    budget: Optional[SearchBudget] = None,
) -> Tuple[Configuration, CriterionMarks]:
    if placement_space_size(app) > cap:
        raise BudgetExceeded(f"configuration space exceeds {cap} candidates")
    budget = budget if budget is not None else SearchBudget()
    best: Optional[Tuple[Configuration, CriterionMarks]] = None
    for n, cfg in enumerate(enumerate_configurations(app), start=1):
        if n > cap:
            raise BudgetExceeded(f"configuration space exceeds {cap} candidates")
        marks = predict_qos(cfg, app, state, user, spies)
        budget.count(STAGE_EXHAUSTIVE)
        if best is None or entity_qos(marks) > entity_qos(best[1]) + MARK_TOL:
            best = (cfg, marks)
    if best is None:
        raise EmptySpace("no valid configuration")
    budget.stage_reached = STAGE_EXHAUSTIVE
    return best


def exhaustive_plan(
    current: Configuration,
    ev: ReconfigurationEvent,
    app: Application,
    state: ContextState,
    user: UserProfile,
    params: Optional[SimulationParams] = None,
    *,
    spies: Sequence[SpyAgent] = (),
    budget: Optional[SearchBudget] = None,
) -> Optional[ReconfigurationPlan]:
    """
    Jump to the global optimum whenever it differs from the running configuration.

    No gain is required: when the context flips back, the argmax may be another
    configuration of equal QoS, and the policy still jumps to it.
    """
    params = params or SimulationParams()
    target, marks = brute_force_best(app, state, user, spies=spies, cap=params.brute_force_cap, budget=budget)
    if target == current:
        return None
    current_marks = predict_qos(current, app, state, user, spies)
    return ReconfigurationPlan(
        base=current,
        target=target,
        actions=diff_actions(current, target, app),
        predicted=marks,
        stage=STAGE_EXHAUSTIVE,
        proximate=service_proximity(current_marks, marks, params.eps_intrinsic, params.eps_contextual),
        event_id=ev.id,
    )


def iterate_to_quiescence(
    current: Configuration,
    app: Application,
    state: ContextState,
    user: UserProfile,
    params: Optional[SimulationParams] = None,
    *,
    spies: Sequence[SpyAgent] = (),
    max_rounds: int = 1000,
) -> Tuple[Configuration, List[ReconfigurationPlan]]:
    """
    Static-context fixpoint: raise an event on every slot and conduct in turn and
    apply the first plan found, until no culprit yields one.
    """
    params = params or SimulationParams()
    index = FamilyIndex.build(app, user, params.eps_intrinsic)
    plans: List[ReconfigurationPlan] = []
    ids = itertools.count(1)
    for _ in range(max_rounds):
        for culprit in app.slot_ids() + app.conduct_ids():
            ev = ReconfigurationEvent(
                id=next(ids), at=state.time, kind=DEGRADATION, culprit=culprit,
                affected_characteristics=(), mark_delta=0.0,
            )
            plan = search_better_configuration(current, ev, app, state, user, params, spies=spies, family_index=index)
            if plan is not None:
                plans.append(plan)
                current = plan.target
                break
        else:
            return current, plans
    raise BudgetExceeded(f"no quiescence after {max_rounds} rounds")
