from dataclasses import replace

import pytest

from builders import deferral_document
from reconfig_sim.app_model import Configuration
from reconfig_sim.config import SimulationParams
from reconfig_sim.context_engine import SET_STATION_LOAD, ContextEvent, initial_context
from reconfig_sim.errors import InvalidDefaultConfiguration, StalePlan
from reconfig_sim.event_manager import CONSUMED, DEFERRED, PENDING
from reconfig_sim.heuristic_search import (
    MOVE,
    REPLACE,
    STAGE_CULPRIT,
    STAGE_SUBGROUP,
    ReconfigurationPlan,
    diff_actions,
    predict_qos,
)
from reconfig_sim.platform_runtime import (
    CONTEXT_EVENT,
    EVENT_ENQUEUED,
    EVENT_SELECTED,
    EXHAUSTIVE,
    HEURISTIC,
    ORDER_COMPLETED,
    ORDER_ISSUED,
    QOS_SAMPLE,
    SEARCH_RESULT,
    apply_reconfiguration,
    deploy_initial,
    issue_order,
    run_simulation_loop,
)
from reconfig_sim.scenario_io import parse_document
from reconfig_sim.trace_output import completed_orders, summarize_trace


def _run(sf, policy=HEURISTIC, **overrides):
    params = sf.params.with_overrides(overrides) if overrides else None
    return run_simulation_loop(sf.app, sf.user, sf, policy=policy, params=params)


def _plan(sf, target):
    state = initial_context(sf.app)
    return ReconfigurationPlan(
        base=sf.default,
        target=target,
        actions=diff_actions(sf.default, target, sf.app),
        predicted=predict_qos(target, sf.app, state, sf.user),
        stage=STAGE_CULPRIT,
        event_id=None,
    )


@pytest.fixture(scope="module")
def surveillance_run(surveillance):
    return _run(surveillance)


# --- deployment and orders --------------------------------------------------

def test_deploy_starts_one_platform_per_station(surveillance):
    state = deploy_initial(surveillance.app, surveillance.user, surveillance)
    assert sorted(state.platforms) == ["S1", "S2", "S3"]
    assert state.records[0].kind == QOS_SAMPLE
    assert state.records[0].at == 0
    assert state.samples[0].overall_qos == pytest.approx(0.65)


def test_invalid_default_is_refused(toy6):
    broken = replace(toy6, default=Configuration.build({"a": ("a1", "host")}, {}))
    with pytest.raises(InvalidDefaultConfiguration):
        deploy_initial(broken.app, broken.user, broken)


def test_order_costs_latency_per_action(toy6):
    state = deploy_initial(toy6.app, toy6.user, toy6)
    one = toy6.default.with_changes(placement={"b": ("b2", "host")})
    order = issue_order(state, _plan(toy6, one), 100)
    assert order.completes_at == 300
    assert state.records[-1].kind == ORDER_ISSUED

    state = deploy_initial(toy6.app, toy6.user, toy6)
    two = toy6.default.with_changes(placement={"a": ("a2", "host"), "b": ("b2", "host")})
    assert issue_order(state, _plan(toy6, two), 100).completes_at == 500


def test_one_order_at_a_time_and_no_stale_plans(toy6):
    state = deploy_initial(toy6.app, toy6.user, toy6)
    target = toy6.default.with_changes(placement={"b": ("b2", "host")})
    order = issue_order(state, _plan(toy6, target), 100)
    with pytest.raises(StalePlan):
        issue_order(state, _plan(toy6, target), 100)

    apply_reconfiguration(order, state)
    assert state.config == target
    assert state.order is None
    assert state.records[-1].kind == ORDER_COMPLETED
    assert [a.kind for a in state.platforms["host"].supervision.applied] == [REPLACE]
    # built on the old default
    with pytest.raises(StalePlan):
        issue_order(state, _plan(toy6, target), 300)


# --- whole runs -------------------------------------------------------------

def test_no_context_events_no_orders(toy6):
    result = _run(toy6)
    assert {r.kind for r in result.records} == {QOS_SAMPLE}
    assert len(result.samples) == 11
    assert result.final_config == toy6.default


def test_one_sample_per_tick(surveillance_run):
    assert len(surveillance_run.samples) == 9000 // 100 + 1
    assert [s.time_ms for s in surveillance_run.samples] == list(range(0, 9001, 100))


def test_surveillance_narrative(surveillance, surveillance_run):
    orders = completed_orders(surveillance_run.records)
    assert len(orders) == 4

    first = orders[0]["payload"]["actions"]
    assert first == [{"kind": REPLACE, "target": "processing", "variant": "processing_v5"}]
    ranks = {v.id: v.power_rank for v in surveillance.app.variants.values()}
    assert ranks["processing_v5"] > ranks["processing_v4"]

    after_saturation = [o for o in orders if o["payload"]["issued_at"] >= 3000]
    moves = after_saturation[0]["payload"]["actions"]
    assert len(moves) == 1
    assert moves[0]["kind"] == MOVE and moves[0]["target"] == "processing"
    assert moves[0]["station"] != "S2"

    by_time = {s.time_ms: s for s in surveillance_run.samples}
    plateau = by_time[2900]
    assert plateau.overall_qos == pytest.approx(1.0)
    assert by_time[3000].overall_qos < plateau.overall_qos
    final = surveillance_run.samples[-1]
    assert final.overall_qos >= plateau.overall_qos - 1e-9
    assert final.config_id != plateau.config_id
    assert [o["at"] for o in orders] == [1200, 1400, 3200, 3400]


def test_running_config_changes_only_at_completion(surveillance_run):
    by_time = {s.time_ms: s for s in surveillance_run.samples}
    for o in completed_orders(surveillance_run.records):
        p = o["payload"]
        for t in range(p["issued_at"], p["completes_at"], 100):
            assert by_time[t].config_id == p["previous"]
        assert by_time[p["completes_at"]].config_id == p["config_id"]


def test_orders_never_overlap(surveillance_run):
    kinds = [r.kind for r in surveillance_run.records if r.kind in (ORDER_ISSUED, ORDER_COMPLETED)]
    assert kinds == [ORDER_ISSUED, ORDER_COMPLETED] * (len(kinds) // 2)


def test_context_changes_are_traced(surveillance_run):
    applied = [r for r in surveillance_run.records if r.kind == CONTEXT_EVENT]
    assert [r.at for r in applied] == [1000, 3000, 5000, 7000]


def test_every_event_is_accounted_for(surveillance_run):
    counts = surveillance_run.queue_counts
    assert counts[PENDING] + counts[DEFERRED] + counts[CONSUMED] == counts["enqueued"]
    assert counts["enqueued"] == summarize_trace(surveillance_run.records).events_enqueued


def test_runs_are_deterministic(surveillance, surveillance_run):
    again = _run(surveillance)
    assert [r.to_dict() for r in again.records] == [r.to_dict() for r in surveillance_run.records]
    assert again.final_config == surveillance_run.final_config


def test_seed_does_not_change_a_fixed_scenario(surveillance, surveillance_run):
    other = _run(surveillance, seed=7)
    assert [s.to_row() for s in other.samples] == [s.to_row() for s in surveillance_run.samples]


def test_heuristic_commits_fewer_actions_than_exhaustive(oscillating):
    heuristic = summarize_trace(_run(oscillating).records)
    exhaustive = summarize_trace(_run(oscillating, EXHAUSTIVE).records)
    assert heuristic.actions_total < exhaustive.actions_total
    assert heuristic.final_overall_qos == pytest.approx(1.0)


def test_language_spy_brings_subtitles(videoconf):
    result = _run(videoconf)
    orders = completed_orders(result.records)
    assert len(orders) == 1
    assert orders[0]["payload"]["actions"] == [{"kind": REPLACE, "target": "subtitles", "variant": "subtitler"}]
    overall = [s.overall_qos for s in result.samples]
    assert overall[0] == pytest.approx(0.9)
    assert min(overall) < 0.9
    assert overall[-1] == pytest.approx(0.9)
    assert result.final_config.variant_of("subtitles") == "subtitler"


# --- horizon edges ------------------------------------------------------------

def test_context_due_at_zero_shapes_the_first_sample(surveillance):
    freed = replace(surveillance, context_events=(ContextEvent(at=0, action=SET_STATION_LOAD, target="S2", value=0.0),))
    state = deploy_initial(freed.app, freed.user, freed)
    assert [r.kind for r in state.records] == [CONTEXT_EVENT, QOS_SAMPLE]
    assert state.records[0].at == 0
    assert state.records[0].payload["rearmed"] == []
    assert state.samples[0].overall_qos == pytest.approx(0.88)
    assert state.pending_context == []


def test_nothing_is_traced_past_the_horizon(surveillance):
    result = _run(surveillance, horizon_ms=1200)
    assert max(r.at for r in result.records) == 1200
    assert [o["at"] for o in completed_orders(result.records)] == [1200]
    kinds = [r.kind for r in result.records]
    assert kinds.count(ORDER_ISSUED) == kinds.count(ORDER_COMPLETED) == 1
    late = [r for r in result.records if r.kind == SEARCH_RESULT and r.payload["outcome"] == "past_horizon"]
    assert late
    assert all(r.at == 1200 for r in late)
    assert result.queue_counts[DEFERRED] >= 1


# --- deferral and rearming ----------------------------------------------------

def test_failed_search_defers_then_a_context_change_rearms():
    sf = parse_document(deferral_document(), SimulationParams())
    result = _run(sf)
    culprit_of = {r.payload["event_id"]: r.payload["culprit"] for r in result.records if r.kind == EVENT_ENQUEUED}
    assert sorted(culprit_of.values()) == ["a", "b"]
    on_a = next(i for i, c in culprit_of.items() if c == "a")
    on_b = next(i for i, c in culprit_of.items() if c == "b")

    decisions = [
        (r.at, r.kind, r.payload.get("event_id"), r.payload.get("outcome"))
        for r in result.records
        if r.kind in (CONTEXT_EVENT, EVENT_SELECTED, SEARCH_RESULT)
    ]
    assert decisions == [
        (1000, CONTEXT_EVENT, None, None),
        (1000, EVENT_SELECTED, on_a, None),
        (1000, SEARCH_RESULT, on_a, "deferred"),
        (1000, EVENT_SELECTED, on_b, None),
        (1000, SEARCH_RESULT, on_b, "consumed"),
        (2000, CONTEXT_EVENT, None, None),
        (2000, EVENT_SELECTED, on_a, None),
        (2000, SEARCH_RESULT, on_a, "deferred"),
    ]

    context = [r for r in result.records if r.kind == CONTEXT_EVENT]
    assert context[0].payload["rearmed"] == []
    assert context[1].payload["rearmed"] == [on_a]
    found = next(r for r in result.records if r.kind == SEARCH_RESULT and r.payload["found"])
    assert found.payload["stage"] == STAGE_SUBGROUP

    orders = completed_orders(result.records)
    assert [o["at"] for o in orders] == [1200]
    assert orders[0]["payload"]["actions"] == [{"kind": REPLACE, "target": "b", "variant": "b2"}]
    assert result.samples[-1].overall_qos == pytest.approx(0.6)
    assert result.queue_counts[DEFERRED] == 1
    assert result.queue_counts[CONSUMED] == 1
    assert result.queue_counts[PENDING] == 0


def test_exhaustive_jumps_even_without_gain(oscillating):
    def gains(policy):
        return [
            r.payload["predicted_overall"] - r.payload["overall"]
            for r in _run(oscillating, policy).records
            if r.kind == SEARCH_RESULT and r.payload["found"]
        ]

    assert all(g > oscillating.params.delta for g in gains(HEURISTIC))
    assert any(abs(g) < 1e-9 for g in gains(EXHAUSTIVE))
