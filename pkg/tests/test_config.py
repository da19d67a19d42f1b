"""Scenario configuration round trips and the height schedule."""

import json

import pytest

from mapkeeper.config import (
    DEFAULT_RELAXATION,
    ScenarioConfig,
    load_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
)
from mapkeeper.core import FeatureKind
from mapkeeper.simulator import ChangeEvent


def _custom_scenario():
    sc = ScenarioConfig(seed=5, weeks=9, cadence=2)
    sc.world.n_features = 40
    sc.world.events = [ChangeEvent(week=3, deaths=6, center=(10.0, 5.0))]
    sc.drive.drift = (0.001, 0.0, 0.0)
    sc.detector.height_thresholds = {FeatureKind.POLE: 1.5, FeatureKind.CORNER: 1.7}
    sc.filter.min_pairs = 2
    sc.maintenance.icp_gate = 2.0
    sc.relaxation = [(1, 1.6, 1.8), (4, 1.4, 1.4)]
    return sc


def test_dict_round_trip():
    sc = _custom_scenario()
    assert scenario_from_dict(scenario_to_dict(sc)) == sc


def test_dict_form_is_json_plain():
    data = scenario_to_dict(_custom_scenario())
    # must survive a JSON encode untouched: no enums, tuples or dataclasses
    assert json.loads(json.dumps(data)) == data
    assert "pole" in data["detector"]["height_thresholds"]


def test_file_round_trip(tmp_path):
    sc = _custom_scenario()
    path = tmp_path / "scenario.json"
    save_scenario(sc, path)
    assert load_scenario(path) == sc


def test_unknown_keys_rejected():
    with pytest.raises(ValueError, match="bogus"):
        scenario_from_dict({"weeks": 3, "bogus": 1})


def test_load_rejects_malformed_files(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("not json {", encoding="utf-8")
    with pytest.raises(ValueError, match="not valid JSON"):
        load_scenario(bad)
    wrong = tmp_path / "list.json"
    wrong.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ValueError, match="JSON object"):
        load_scenario(wrong)


def test_thresholds_follow_schedule():
    sc = ScenarioConfig(relaxation=[(1, 1.6, 1.8), (8, 1.6, 1.5), (11, 1.5, 1.5)])
    expect = {
        0: (1.6, 1.8),  # before the first breakpoint: its values still apply
        1: (1.6, 1.8),
        7: (1.6, 1.8),
        8: (1.6, 1.5),
        10: (1.6, 1.5),
        11: (1.5, 1.5),
        99: (1.5, 1.5),
    }
    for week, (pole, corner) in expect.items():
        thr = sc.thresholds_for_week(week)
        assert thr[FeatureKind.POLE] == pole, week
        assert thr[FeatureKind.CORNER] == corner, week


def test_default_schedule_relaxes_monotonically():
    sc = ScenarioConfig()
    assert sc.relaxation == DEFAULT_RELAXATION
    for kind in FeatureKind:
        values = [sc.thresholds_for_week(w)[kind] for w in range(20)]
        assert all(b <= a for a, b in zip(values, values[1:]))
    assert sc.thresholds_for_week(0) == {FeatureKind.POLE: 1.6, FeatureKind.CORNER: 1.8}
    assert sc.thresholds_for_week(18) == {FeatureKind.POLE: 1.4, FeatureKind.CORNER: 1.4}


def test_detector_for_week_does_not_mutate_base():
    sc = ScenarioConfig()
    det = sc.detector_for_week(18)
    assert det.height_thresholds[FeatureKind.POLE] == 1.4
    assert det.max_range == sc.detector.max_range
    assert sc.detector.height_thresholds[FeatureKind.POLE] == 1.6
