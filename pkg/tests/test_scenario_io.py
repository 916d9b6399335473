import copy
import json

import pytest

from reconfig_sim.app_model import enumerate_configurations
from reconfig_sim.config import SimulationParams
from reconfig_sim.errors import (
    ScenarioConstraintError,
    ScenarioError,
    ScenarioReferenceError,
    ScenarioSyntaxError,
)
from reconfig_sim.reference_scenarios import surveillance_document
from reconfig_sim.scenario_io import (
    load_scenario,
    parse_document,
    parse_scenario,
    scenario_to_document,
    serialize_scenario,
)


def _doc():
    return copy.deepcopy(surveillance_document())


def _app(doc):
    return doc["application"]


def _slot(doc, slot_id):
    for g in _app(doc)["groups"]:
        for sg in g["subgroups"]:
            for sl in sg["slots"]:
                if sl["id"] == slot_id:
                    return sl
    raise KeyError(slot_id)


def _conduct(doc, conduct_id):
    for g in _app(doc)["groups"]:
        for sg in g["subgroups"]:
            for c in sg.get("conducts", []):
                if c["id"] == conduct_id:
                    return c
    raise KeyError(conduct_id)


def test_surveillance_document_parses():
    sf = parse_document(_doc(), SimulationParams())
    assert sf.name == "surveillance135"
    assert sorted(sf.app.slots) == ["capture", "compression", "display", "processing"]
    assert sf.default.route_of("k1") == ("L12",)
    assert sf.default.route_of("k2") == ()
    assert [e.at for e in sf.context_events] == [1000, 3000, 5000, 7000]
    assert sf.params.horizon_ms == 9000


def test_unknown_station_in_default_is_a_reference_error():
    doc = _doc()
    doc["default_configuration"]["placement"]["processing"]["station"] = "S9"
    with pytest.raises(ScenarioReferenceError) as exc:
        parse_document(doc)
    assert exc.value.ref_id == "S9"


def test_syntax_error_reports_line_and_column():
    with pytest.raises(ScenarioSyntaxError) as exc:
        parse_scenario('{\n  "name": }')
    assert exc.value.line == 2
    assert exc.value.column == 11


def test_serialization_is_canonical(surveillance):
    text = serialize_scenario(surveillance)
    again = parse_scenario(text, SimulationParams())
    assert serialize_scenario(again) == text
    assert again.default == surveillance.default
    assert again.app == surveillance.app
    assert again.params == surveillance.params
    assert list(enumerate_configurations(again.app)) == list(enumerate_configurations(surveillance.app))
    assert json.loads(text) == scenario_to_document(surveillance)


def test_spies_and_environment_survive_serialization(videoconf):
    again = parse_scenario(serialize_scenario(videoconf), SimulationParams())
    assert again.spies == videoconf.spies
    assert dict(again.environment) == {"language": "en"}
    assert again.context_events == videoconf.context_events


def test_load_scenario_from_disk(tmp_path, toy6):
    path = tmp_path / "toy6.json"
    path.write_text(serialize_scenario(toy6), encoding="utf-8")
    assert load_scenario(path).default == toy6.default


def test_parameters_override_the_base():
    doc = _doc()
    doc["parameters"] = {"horizon_ms": 500, "delta": 0.02, "ring_radius": None, "point_thresholds": {"k3": 0.3}}
    params = parse_document(doc, SimulationParams(dt_ms=50)).params
    assert params.horizon_ms == 500
    assert params.delta == 0.02
    assert params.dt_ms == 50
    assert params.threshold_for("k3") == 0.3
    assert params.threshold_for("k2") == params.event_threshold


def _set(path_fn, value):
    def mutate(doc):
        target, key = path_fn(doc)
        target[key] = value
    return mutate


def _delete(path_fn):
    def mutate(doc):
        target, key = path_fn(doc)
        del target[key]
    return mutate


def _add_cycle(doc):
    sg = _app(doc)["groups"][0]["subgroups"][1]
    sg["conducts"].append({"id": "back", "source": "processing.out", "sink": "compression.in"})


def _duplicate_wish(doc):
    doc["user"]["wishes"].append(copy.deepcopy(doc["user"]["wishes"][0]))


def _unmeasured_jitter(doc):
    _app(doc)["characteristics"].append({"id": "jitter", "kind": "contextual", "unit": "ms", "higher_is_better": False})
    _app(doc)["groups"][0]["subgroups"][0]["characteristics"].append("jitter")
    doc["user"]["wishes"].append({"characteristic": "jitter", "breakpoints": [[0.0, 1.0], [50.0, 0.0]]})


CORRUPTIONS = [
    ("no application", _delete(lambda d: (d, "application")), ScenarioSyntaxError, None),
    ("stations not a list", _set(lambda d: (_app(d), "stations"), {}), ScenarioSyntaxError, None),
    ("zero capacity", _set(lambda d: (_app(d)["stations"][0], "capacity"), 0), ScenarioConstraintError, "station-capacity"),
    ("base load over capacity", _set(lambda d: (_app(d)["stations"][1], "base_load"), 100), ScenarioConstraintError, "station-base-load"),
    ("self link", _set(lambda d: (_app(d)["links"][0], "endpoints"), ["S1", "S1"]), ScenarioConstraintError, "link-endpoints-distinct"),
    ("link to nowhere", _set(lambda d: (_app(d)["links"][0], "endpoints"), ["S1", "S9"]), ScenarioReferenceError, None),
    ("capacity as text", _set(lambda d: (_app(d)["stations"][0], "capacity"), "six"), ScenarioSyntaxError, None),
    ("infinite latency", _set(lambda d: (_app(d)["links"][0], "latency"), float("inf")), ScenarioConstraintError, "finite-number"),
    ("conduct to unknown slot", _set(lambda d: (_conduct(d, "k1"), "sink"), "nowhere.in"), ScenarioReferenceError, None),
    ("conduct without port", _set(lambda d: (_conduct(d, "k1"), "source"), "capture"), ScenarioSyntaxError, None),
    ("conduct onto itself", _set(lambda d: (_conduct(d, "k2"), "sink"), "compression.in"), ScenarioConstraintError, "conduct-distinct-endpoints"),
    ("cyclic conducts", _add_cycle, ScenarioConstraintError, "acyclic-conducts"),
    ("no variants", _set(lambda d: (_slot(d, "compression"), "variants"), []), ScenarioConstraintError, "admissible-variants-non-empty"),
    ("repeated power rank", _set(lambda d: (_slot(d, "compression")["variants"][1], "power_rank"), 1), ScenarioConstraintError, "power-rank-unique"),
    ("contextual contribution", _set(lambda d: (_slot(d, "compression")["variants"][0], "intrinsic_contribution"), {"frame_rate": 0.5}), ScenarioConstraintError, "contribution-intrinsic-only"),
    ("contribution above one", _set(lambda d: (_slot(d, "compression")["variants"][0], "intrinsic_contribution"), {"image_quality": 1.5}), ScenarioConstraintError, "mark-range"),
    ("negative demand", _set(lambda d: (_slot(d, "compression")["variants"][0], "cpu_demand"), -1), ScenarioConstraintError, "cpu-demand-non-negative"),
    ("descending breakpoints", _set(lambda d: (d["user"]["wishes"][0], "breakpoints"), [[25, 1.0], [5, 0.0]]), ScenarioConstraintError, "wish-function"),
    ("two wishes", _duplicate_wish, ScenarioConstraintError, "one-wish-per-characteristic"),
    ("contextual characteristic nothing measures", _unmeasured_jitter, ScenarioConstraintError, "contextual-characteristic-measured"),
    ("zero group weights", _set(lambda d: (d["user"], "group_weights"), {"surveillance": 0.0}), ScenarioConstraintError, "weights-positive"),
    ("negative sub-group weight", _set(lambda d: (d["user"]["subgroup_weights"], "analysis"), -1.0), ScenarioConstraintError, "weight-non-negative"),
    ("capture off its station", _set(lambda d: (d["default_configuration"]["placement"]["capture"], "station"), "S2"), ScenarioConstraintError, "default-configuration-valid"),
    ("unknown context action", _set(lambda d: (d["context_events"][0], "action"), "explode"), ScenarioConstraintError, "context-action"),
    ("negative time", _set(lambda d: (d["context_events"][0], "at"), -5), ScenarioConstraintError, "context-at-non-negative"),
    ("load on unknown station", _set(lambda d: (d["context_events"][0], "target"), "S9"), ScenarioReferenceError, None),
    ("unknown parameter", _set(lambda d: (d["parameters"], "bogus"), 1), ScenarioConstraintError, "known-parameter"),
    ("zero horizon", _set(lambda d: (d["parameters"], "horizon_ms"), 0), ScenarioConstraintError, "horizon-positive"),
    ("fractional tick", _set(lambda d: (d["parameters"], "dt_ms"), 2.5), ScenarioSyntaxError, None),
]


@pytest.mark.parametrize("name, mutate, error, invariant", CORRUPTIONS, ids=[c[0] for c in CORRUPTIONS])
def test_corrupted_documents_are_rejected(name, mutate, error, invariant):
    doc = _doc()
    mutate(doc)
    with pytest.raises(error) as exc:
        parse_document(doc, SimulationParams())
    assert isinstance(exc.value, ScenarioError)
    if invariant is not None:
        assert exc.value.invariant == invariant


def test_not_an_object_at_all():
    with pytest.raises(ScenarioSyntaxError):
        parse_scenario("[1, 2, 3]")


def test_contextual_characteristic_fed_by_a_source_value_is_accepted():
    doc = _doc()
    _unmeasured_jitter(doc)
    _app(doc)["source_values"]["jitter"] = 2.0
    sf = parse_document(doc, SimulationParams())
    assert "jitter" in sf.app.subgroups["acquisition"].characteristics
