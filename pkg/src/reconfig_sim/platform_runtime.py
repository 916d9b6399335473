"""
platform_runtime.py

What this file does:
  - Deploys the default configuration and one LocalPlatform per used station
  - Runs the fixed-tick loop: context events -> order commit -> evaluation ->
    event detection -> selection -> search -> order issue
  - Keeps the audit trace (TraceRecord) and the per-tick samples

This file does NOT:
  - Read or write files (scenario_io / trace_output)

Rules:
  - at most one order in flight; the old configuration keeps running until the
    order's completion tick
  - events detected while an order is in flight wait in the queue
  - an order costs action_latency_ms per action
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence

from .app_model import Application, Configuration, FamilyIndex, validate_configuration
from .config import SimulationParams
from .context_engine import (
    ContextEvent,
    ContextState,
    SpyAgent,
    apply_context_event,
    detect_reconfiguration_events,
    evaluate_configuration,
    initial_context,
)
from .errors import InvalidDefaultConfiguration, StalePlan
from .event_manager import EventQueue, ReconfigurationEvent, priority_of
from .heuristic_search import (
    Action,
    ReconfigurationPlan,
    SearchBudget,
    exhaustive_plan,
    search_better_configuration,
)
from .qos_model import QoSReport, UserProfile
from .scenario_io import ScenarioFile

logger = logging.getLogger(__name__)

QOS_SAMPLE = "qos_sample"
CONTEXT_EVENT = "context_event"
EVENT_ENQUEUED = "event_enqueued"
EVENT_SELECTED = "event_selected"
SEARCH_RESULT = "search_result"
ORDER_ISSUED = "order_issued"
ORDER_COMPLETED = "order_completed"
TRACE_KINDS = (QOS_SAMPLE, CONTEXT_EVENT, EVENT_ENQUEUED, EVENT_SELECTED, SEARCH_RESULT, ORDER_ISSUED, ORDER_COMPLETED)

HEURISTIC = "heuristic"
EXHAUSTIVE = "exhaustive"
POLICIES = (HEURISTIC, EXHAUSTIVE)


@dataclass(frozen=True)
class TraceRecord:
    at: int
    seq: int
    kind: str
    payload: Mapping[str, Any]

    def to_dict(self) -> Dict[str, Any]:
        return {"seq": self.seq, "at": self.at, "kind": self.kind, "payload": dict(self.payload)}


@dataclass(frozen=True)
class TickSample:
    time_ms: int
    overall_qos: float
    intrinsic: float
    contextual: float
    config_id: str
    in_flight: int

    def to_row(self) -> Dict[str, Any]:
        return {
            "time_ms": self.time_ms,
            "overall_qos": self.overall_qos,
            "intrinsic": self.intrinsic,
            "contextual": self.contextual,
            "config_id": self.config_id,
            "in_flight": self.in_flight,
        }


@dataclass(frozen=True)
class ReconfigurationOrder:
    plan: ReconfigurationPlan
    issued_at: int
    completes_at: int


# ---------------------------------------------------------------------------
# The five local managers (facades over the shared in-process engine)
# ---------------------------------------------------------------------------
class UserManager:
    def __init__(self, user: UserProfile) -> None:
        self.user = user

    def importance(self, ev: ReconfigurationEvent) -> float:
        return priority_of(ev, self.user)


class EventsManager:
    def __init__(self, station: str, queue: EventQueue, user: UserManager) -> None:
        self.station = station
        self.queue = queue
        self.user = user
        self.received = 0

    def intake(self, ev: ReconfigurationEvent) -> ReconfigurationEvent:
        self.received += 1
        return self.queue.enqueue(ev, self.user.user)


class EvaluationManager:
    def __init__(self, station: str) -> None:
        self.station = station
        self.samples = 0

    def sample(self, cfg, app, context, user, spies, at) -> QoSReport:
        self.samples += 1
        return evaluate_configuration(cfg, app, context, user, spies, at=at)


class CommunicationManager:
    """Message router: events go to the platform of the station hosting the culprit."""

    def __init__(self, station: str) -> None:
        self.station = station
        self.messages = 0

    def route(self, ev: ReconfigurationEvent, cfg: Configuration, app: Application) -> str:
        self.messages += 1
        if ev.culprit in app.conducts:
            return cfg.station_of(app.conducts[ev.culprit].source_slot)
        if ev.culprit in app.slots:
            return cfg.station_of(ev.culprit)
        return self.station


class SupervisionManager:
    def __init__(self, station: str) -> None:
        self.station = station
        self.applied: List[Action] = []

    def apply(self, action: Action) -> None:
        self.applied.append(action)


@dataclass
class LocalPlatform:
    station: str
    events: EventsManager
    evaluation: EvaluationManager
    communication: CommunicationManager
    user: UserManager
    supervision: SupervisionManager

    @classmethod
    def create(cls, station: str, queue: EventQueue, user: UserProfile) -> "LocalPlatform":
        um = UserManager(user)
        return cls(
            station=station,
            events=EventsManager(station, queue, um),
            evaluation=EvaluationManager(station),
            communication=CommunicationManager(station),
            user=um,
            supervision=SupervisionManager(station),
        )


# ---------------------------------------------------------------------------
# Running state
# ---------------------------------------------------------------------------
@dataclass
class RunningState:
    app: Application
    user: UserProfile
    scenario: ScenarioFile
    params: SimulationParams
    policy: str
    config: Configuration
    context: ContextState
    queue: EventQueue
    family_index: FamilyIndex
    platforms: Dict[str, LocalPlatform] = field(default_factory=dict)
    order: Optional[ReconfigurationOrder] = None
    report: Optional[QoSReport] = None
    records: List[TraceRecord] = field(default_factory=list)
    samples: List[TickSample] = field(default_factory=list)
    pending_context: List[ContextEvent] = field(default_factory=list)
    _seq: Iterator[int] = field(default_factory=lambda: itertools.count(1))
    _event_ids: Iterator[int] = field(default_factory=lambda: itertools.count(1))

    @property
    def spies(self) -> Sequence[SpyAgent]:
        return self.scenario.spies

    @property
    def overall(self) -> float:
        return self.report.overall if self.report is not None else 0.0

    def trace(self, at: int, kind: str, payload: Optional[Mapping[str, Any]] = None, **extra: Any) -> TraceRecord:
        body = dict(payload or {})
        body.update(extra)
        body.setdefault("overall", self.overall)
        rec = TraceRecord(at=at, seq=next(self._seq), kind=kind, payload=body)
        self.records.append(rec)
        return rec

    def coordinator(self) -> LocalPlatform:
        return self.platforms[sorted(self.platforms)[0]]


@dataclass(frozen=True)
class SimulationResult:
    records: List[TraceRecord]
    samples: List[TickSample]
    final_config: Configuration
    queue_counts: Dict[str, int]
    platforms: List[str]
    policy: str
    params: SimulationParams


def _sync_platforms(state: RunningState) -> None:
    used = state.config.stations_used()
    for st in used:
        if st not in state.platforms:
            state.platforms[st] = LocalPlatform.create(st, state.queue, state.user)
    for st in sorted(set(state.platforms) - set(used)):
        del state.platforms[st]


def _sample(state: RunningState, at: int) -> QoSReport:
    report = state.coordinator().evaluation.sample(
        state.config, state.app, state.context, state.user, state.spies, at
    )
    state.report = report
    in_flight = 1 if state.order is not None else 0
    state.samples.append(TickSample(
        time_ms=at,
        overall_qos=report.overall,
        intrinsic=report.application.intrinsic,
        contextual=report.application.contextual,
        config_id=state.config.config_id,
        in_flight=in_flight,
    ))
    state.trace(
        at, QOS_SAMPLE,
        intrinsic=report.application.intrinsic,
        contextual=report.application.contextual,
        config_id=state.config.config_id,
        in_flight=in_flight,
    )
    return report


def deploy_initial(
    app: Application,
    user: UserProfile,
    scenario: ScenarioFile,
    *,
    policy: str = HEURISTIC,
    params: Optional[SimulationParams] = None,
) -> RunningState:
    violations = validate_configuration(scenario.default, app)
    if violations:
        raise InvalidDefaultConfiguration("; ".join(violations))
    if policy not in POLICIES:
        raise ValueError(f"unknown policy '{policy}'")
    params = params or scenario.params
    queue = EventQueue()
    state = RunningState(
        app=app,
        user=user,
        scenario=scenario,
        params=params,
        policy=policy,
        config=scenario.default,
        context=initial_context(app, scenario.environment),
        queue=queue,
        family_index=FamilyIndex.build(app, user, params.eps_intrinsic),
        pending_context=sorted(scenario.context_events, key=lambda e: e.at),
    )
    _sync_platforms(state)
    _apply_due_context(state, 0)
    _sample(state, 0)
    logger.info("deployed %s on %d station(s)", scenario.default.config_id, len(state.platforms))
    return state


def issue_order(state: RunningState, plan: ReconfigurationPlan, at: int) -> ReconfigurationOrder:
    if plan.base != state.config:
        raise StalePlan(f"plan built on {plan.base.config_id}, running {state.config.config_id}")
    if state.order is not None:
        raise StalePlan("another order is already in flight")
    order = ReconfigurationOrder(
        plan=plan,
        issued_at=at,
        completes_at=at + state.params.action_latency_ms * len(plan.actions),
    )
    state.order = order
    state.trace(
        at, ORDER_ISSUED,
        event_id=plan.event_id,
        target=plan.target.config_id,
        actions=[a.to_dict() for a in plan.actions],
        completes_at=order.completes_at,
    )
    return order


def apply_reconfiguration(order: ReconfigurationOrder, state: RunningState, at: Optional[int] = None) -> RunningState:
    if order.plan.base != state.config:
        raise StalePlan(f"plan built on {order.plan.base.config_id}, running {state.config.config_id}")
    before = state.config
    state.config = order.plan.target
    state.order = None
    _sync_platforms(state)
    for action in order.plan.actions:
        if action.target in state.app.slots and action.target in state.config.placement_map:
            station = state.config.station_of(action.target)
        elif action.target in state.app.slots:
            station = before.station_of(action.target)
        else:
            station = state.config.station_of(state.app.conducts[action.target].source_slot)
        if station in state.platforms:
            state.platforms[station].supervision.apply(action)
    state.trace(
        order.completes_at if at is None else at, ORDER_COMPLETED,
        event_id=order.plan.event_id,
        previous=before.config_id,
        config_id=state.config.config_id,
        actions=[a.to_dict() for a in order.plan.actions],
        issued_at=order.issued_at,
        completes_at=order.completes_at,
    )
    return state


def _plan_for(state: RunningState, ev: ReconfigurationEvent, budget: SearchBudget) -> Optional[ReconfigurationPlan]:
    if state.policy == EXHAUSTIVE:
        return exhaustive_plan(
            state.config, ev, state.app, state.context, state.user, state.params,
            spies=state.spies, budget=budget,
        )
    return search_better_configuration(
        state.config, ev, state.app, state.context, state.user, state.params,
        spies=state.spies, budget=budget, family_index=state.family_index,
    )


def _apply_due_context(state: RunningState, t: int) -> bool:
    applied = False
    while state.pending_context and state.pending_context[0].at <= t:
        ev = state.pending_context.pop(0)
        state.context = apply_context_event(state.context, ev)
        applied = True
        rearmed = state.queue.rearm()
        state.trace(t, CONTEXT_EVENT, {
            "scheduled_at": ev.at, "action": ev.action, "target": ev.target, "value": ev.value, "rearmed": rearmed,
        })
    return applied


def _last_tick(params: SimulationParams) -> int:
    return params.horizon_ms - params.horizon_ms % params.dt_ms


def step(state: RunningState, t: int) -> None:
    # 1. context
    applied = _apply_due_context(state, t)

    # 2. commit
    if state.order is not None and state.order.completes_at <= t:
        apply_reconfiguration(state.order, state, at=t)

    # 3. evaluate
    prev = state.report
    report = _sample(state, t)

    # 4. detect
    if prev is not None:
        found = detect_reconfiguration_events(
            prev, report, state.app, state.spies,
            threshold=state.params.event_threshold,
            point_thresholds=state.params.point_thresholds,
            ids=state._event_ids,
        )
        for ev in found:
            station = state.coordinator().communication.route(ev, state.config, state.app)
            platform = state.platforms.get(station, state.coordinator())
            kept = platform.events.intake(ev)
            state.trace(t, EVENT_ENQUEUED, {
                "event_id": ev.id,
                "event_kind": ev.kind,
                "culprit": ev.culprit,
                "affected": list(ev.affected_characteristics),
                "mark_delta": ev.mark_delta,
                "priority": platform.user.importance(ev),
                "point": ev.point,
                "station": platform.station,
                "survivor": kept.id,
            })

    # 5. decide
    if state.order is not None:
        return
    while True:
        ev = state.queue.select_next()
        if ev is None:
            break
        state.trace(t, EVENT_SELECTED, event_id=ev.id, culprit=ev.culprit, priority=ev.priority)
        budget = SearchBudget()
        plan = _plan_for(state, ev, budget)
        if plan is None:
            state.queue.defer(ev.id)
            state.trace(t, SEARCH_RESULT, event_id=ev.id, found=False, outcome="deferred", **budget.to_dict())
            continue
        if t + state.params.action_latency_ms * len(plan.actions) > _last_tick(state.params):
            # the order could not complete before the run ends
            state.queue.defer(ev.id)
            state.trace(
                t, SEARCH_RESULT, event_id=ev.id, found=True, outcome="past_horizon",
                stage=plan.stage, predicted_overall=plan.overall, **budget.to_dict(),
            )
            continue
        state.queue.consume(ev.id)
        state.trace(
            t, SEARCH_RESULT, event_id=ev.id, found=True, outcome="consumed",
            stage=plan.stage, predicted_overall=plan.overall, proximate=plan.proximate,
            actions=[a.to_dict() for a in plan.actions], **budget.to_dict(),
        )
        issue_order(state, plan, t)
        break
    if applied:
        logger.debug("t=%d context now %s", t, dict(state.context.station_loads))


def run_simulation_loop(
    app: Application,
    user: UserProfile,
    scenario: ScenarioFile,
    *,
    policy: str = HEURISTIC,
    params: Optional[SimulationParams] = None,
) -> SimulationResult:
    state = deploy_initial(app, user, scenario, policy=policy, params=params)
    dt = state.params.dt_ms
    for t in range(dt, state.params.horizon_ms + 1, dt):
        step(state, t)
    logger.info(
        "run finished: %d record(s), %d order(s)",
        len(state.records), sum(1 for r in state.records if r.kind == ORDER_COMPLETED),
    )
    return SimulationResult(
        records=list(state.records),
        samples=list(state.samples),
        final_config=state.config,
        queue_counts=state.queue.counts(),
        platforms=sorted(state.platforms),
        policy=policy,
        params=state.params,
    )
