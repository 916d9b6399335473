import math

import pytest

from builders import single_configuration_document
from reconfig_sim.app_model import (
    Configuration,
    FamilyIndex,
    culprit_neighbors,
    enumerate_configurations,
    intrinsic_mark_of,
    partition_into_families,
    placement_space_size,
    validate_configuration,
)
from reconfig_sim.errors import UnknownCulprit
from reconfig_sim.reference_scenarios import generate_reference_scenario
from reconfig_sim.scenario_io import parse_document


def _configs(sf):
    return list(enumerate_configurations(sf.app))


def test_toy6_has_six_configurations(toy6):
    assert len(_configs(toy6)) == 6


def test_surveillance_has_135_configurations(surveillance):
    configs = _configs(surveillance)
    assert len(configs) == 135
    assert placement_space_size(surveillance.app) == 135


def test_scaling_count_matches_analytic_product():
    sf = generate_reference_scenario("scaling(3,3,2)")
    assert placement_space_size(sf.app) == 216
    assert len(_configs(sf)) == 216


def test_single_configuration_application():
    sf = parse_document(single_configuration_document())
    assert _configs(sf) == [sf.default]


def test_enumeration_is_unique_valid_and_ordered(surveillance):
    configs = _configs(surveillance)
    assert len({c.key for c in configs}) == len(configs)
    assert all(validate_configuration(c, surveillance.app) == [] for c in configs)
    assert configs == list(enumerate_configurations(surveillance.app))
    first = configs[0].placement_map
    assert first["compression"] == ("compression_v1", "S1")
    assert first["processing"] == ("processing_v1", "S1")


def test_default_is_valid(surveillance):
    assert validate_configuration(surveillance.default, surveillance.app) == []


def test_validate_reports_every_kind_of_violation(surveillance):
    app, cfg = surveillance.app, surveillance.default

    bad_variant = cfg.with_changes(placement={"compression": ("processing_v1", "S2")})
    assert any("inadmissible variant" in v for v in validate_configuration(bad_variant, app))

    pinned = cfg.with_changes(placement={"capture": ("camera", "S2")}, routes={"k1": ()})
    assert any("inadmissible station" in v for v in validate_configuration(pinned, app))

    missing = Configuration.build({s: p for s, p in cfg.placement_map.items() if s != "display"}, cfg.route_map)
    assert "missing slot 'display'" in validate_configuration(missing, app)

    unknown = cfg.with_changes(placement={"processing": ("processing_v4", "S9")})
    assert any("unknown station" in v for v in validate_configuration(unknown, app))

    # k3 runs S2 -> S3; the S1-S3 link does not start at S2
    disconnected = cfg.with_changes(routes={"k3": ("L13",)})
    assert "disconnected route for conduct 'k3'" in validate_configuration(disconnected, app)

    no_link = cfg.with_changes(routes={"k3": ()})
    assert "disconnected route for conduct 'k3'" in validate_configuration(no_link, app)


def test_slot_order_follows_the_flow(surveillance):
    assert surveillance.app.slot_order() == ["capture", "compression", "processing", "display"]


def test_routes_between_stations(surveillance):
    app = surveillance.app
    assert app.route_options("S1", "S1") == [()]
    assert app.route_options("S1", "S2") == [("L12",)]


def test_config_id_is_stable(surveillance):
    cfg = surveillance.default
    again = Configuration.build(cfg.placement_map, cfg.route_map)
    assert again == cfg
    assert again.config_id == cfg.config_id
    assert cfg.with_changes(placement={"processing": ("processing_v5", "S2")}).config_id != cfg.config_id


def test_toy6_families(toy6):
    families = partition_into_families(_configs(toy6), toy6.app, toy6.user, eps_intrinsic=0.05)
    assert [f.intrinsic_mark for f in families] == pytest.approx([0.8, 0.7, 0.6, 0.5])
    assert [len(f.members) for f in families] == [1, 1, 2, 2]


def test_families_partition_the_space(surveillance):
    configs = _configs(surveillance)
    eps = 0.05
    families = partition_into_families(configs, surveillance.app, surveillance.user, eps)
    members = [c for f in families for c in f.members]
    assert sorted(c.key for c in members) == sorted(c.key for c in configs)
    for f in families:
        for c in f.members:
            assert f.intrinsic_mark - intrinsic_mark_of(c, surveillance.app, surveillance.user) <= eps + 1e-9
    for a, b in zip(families, families[1:]):
        assert a.intrinsic_mark - b.intrinsic_mark > eps


@pytest.mark.parametrize("eps", [0.0, 0.05, 0.1, 0.3])
def test_family_index_agrees_with_enumeration(surveillance, eps):
    families = partition_into_families(_configs(surveillance), surveillance.app, surveillance.user, eps)
    index = FamilyIndex.build(surveillance.app, surveillance.user, eps)
    assert len(index.founders) == len(families)
    for f, founder in zip(families, index.founders):
        assert math.isclose(f.intrinsic_mark, founder, abs_tol=1e-9)
    for i, f in enumerate(families):
        for c in f.members:
            assert index.family_of(intrinsic_mark_of(c, surveillance.app, surveillance.user)) == i


def test_family_index_nearest_prefers_closer_then_higher(toy6):
    index = FamilyIndex.build(toy6.app, toy6.user, 0.05)
    assert index.founders == pytest.approx((0.8, 0.7, 0.6, 0.5))
    # from 0.6: 0.7 and 0.5 are equally close, the higher one first
    assert index.nearest(2, 2) == [1, 3, 0]
    assert index.nearest(0, 1) == [1]


def test_culprit_neighbors_of_a_slot(surveillance):
    cfg = surveillance.default
    neighbours = culprit_neighbors(cfg, "compression", surveillance.app)
    # 3 variants x 3 stations, minus the running pair
    assert len(neighbours) == 8
    for n in neighbours:
        assert n != cfg
        assert validate_configuration(n, surveillance.app) == []
        for slot in ("capture", "processing", "display"):
            assert n.placement_map[slot] == cfg.placement_map[slot]


def test_culprit_neighbors_of_a_conduct_with_a_single_route(surveillance):
    assert culprit_neighbors(surveillance.default, "k3", surveillance.app) == []


def test_unknown_culprit(surveillance):
    with pytest.raises(UnknownCulprit):
        culprit_neighbors(surveillance.default, "nope", surveillance.app)
