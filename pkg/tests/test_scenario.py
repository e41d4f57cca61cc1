import copy
import json
from pathlib import Path

import pytest

from auvc2.scenario import ScenarioError, parse_scenario

SCENARIOS = Path(__file__).parent.parent / "scenarios"

MINIMAL = {
    "duration_s": 60,
    "plan": {
        "origin": {"lat": 56.0, "lon": -5.0},
        "launch": {"lat": 56.0, "lon": -5.0},
        "recovery": {"lat": 56.001, "lon": -5.0},
        "shore_station": {"lat": 56.0, "lon": -5.0},
        "objectives": [
            {"id": 1, "name": "m", "kind": "reacquire", "target": {"lat": 56.002, "lon": -5.0}}
        ],
    },
    "vehicles": [
        {"id": 1, "name": "a", "kind": "auv", "start": {"lat": 56.0, "lon": -5.0}}
    ],
    "relay": {"modem_id": 10},
}


def variants(**overrides):
    data = copy.deepcopy(MINIMAL)
    for dotted, value in overrides.items():
        node = data
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node[int(part)] if part.isdigit() else node[part]
        key = parts[-1]
        node[int(key) if key.isdigit() else key] = value
    return data


def test_minimal_gets_defaults():
    scenario = parse_scenario(copy.deepcopy(MINIMAL))
    assert scenario.seed == 0
    assert scenario.tick_ms == 500
    assert scenario.channel.bitrate_bps == 13_900
    assert scenario.channel.max_range_m == 3500.0
    assert scenario.relay.tcp_listen == "127.0.0.1:40400"
    assert scenario.drain_multiplier == 1.0
    specs = scenario.vehicle_specs()
    assert specs[0].status_period_s == 30
    assert specs[0].cruise_speed_kn == 2.5


def test_bad_latitude_names_exact_path():
    with pytest.raises(ScenarioError) as err:
        parse_scenario(variants(**{"vehicles.0.start": {"lat": 95, "lon": 0}}))
    assert any("vehicles[0].start.lat" in e for e in err.value.errors)


def test_duplicate_vehicle_id():
    data = copy.deepcopy(MINIMAL)
    data["vehicles"].append(
        {"id": 1, "name": "b", "kind": "auv", "start": {"lat": 56.0, "lon": -5.0}}
    )
    with pytest.raises(ScenarioError) as err:
        parse_scenario(data)
    assert any("duplicate vehicle id" in e for e in err.value.errors)


def test_unknown_key_rejected():
    with pytest.raises(ScenarioError) as err:
        parse_scenario(variants(bogus=1))
    assert any("bogus: unknown key" in e for e in err.value.errors)


def test_nested_unknown_key_rejected():
    with pytest.raises(ScenarioError) as err:
        parse_scenario(variants(**{"relay.extra": True}))
    assert any("relay.extra: unknown key" in e for e in err.value.errors)


def test_relay_modem_must_differ_from_vehicles():
    with pytest.raises(ScenarioError) as err:
        parse_scenario(variants(**{"relay.modem_id": 1}))
    assert any("relay.modem_id" in e for e in err.value.errors)


def test_missing_duration_reported():
    data = copy.deepcopy(MINIMAL)
    del data["duration_s"]
    with pytest.raises(ScenarioError) as err:
        parse_scenario(data)
    assert any("duration_s: missing" in e for e in err.value.errors)


def test_fault_schedule_validated():
    data = variants(
        fault_schedule=[
            {"t_s": 10, "vehicle_id": 1, "fault": "MOTOR", "action": "set"},
            {"t_s": 5, "vehicle_id": 1, "fault": "MOTOR", "action": "clear"},
        ]
    )
    with pytest.raises(ScenarioError) as err:
        parse_scenario(data)
    assert any("sorted" in e for e in err.value.errors)


def test_fault_unknown_vehicle():
    data = variants(
        fault_schedule=[{"t_s": 10, "vehicle_id": 5, "fault": "NAV", "action": "set"}]
    )
    with pytest.raises(ScenarioError) as err:
        parse_scenario(data)
    assert any("unknown vehicle 5" in e for e in err.value.errors)


def test_plan_invariants_checked():
    data = variants(**{"plan.objectives": [
        {"id": 1, "name": "m", "kind": "reacquire", "target": {"lat": 56.3, "lon": -5.0}}
    ]})
    with pytest.raises(ScenarioError) as err:
        parse_scenario(data)
    assert any("GEOMETRY_TOO_FAR" in e for e in err.value.errors)


def test_multiple_errors_collected():
    data = variants(bogus=1, **{"relay.modem_id": 1})
    with pytest.raises(ScenarioError) as err:
        parse_scenario(data)
    assert len(err.value.errors) >= 2


@pytest.mark.parametrize(
    "name", ["trial.json", "smoke.json", "golden.json", "out_of_range.json", "intermittent.json"]
)
def test_bundled_fixtures_parse(name):
    scenario = parse_scenario(SCENARIOS / name)
    assert scenario.duration_s > 0
    assert scenario.build_world() is not None


def test_missing_file_reported():
    with pytest.raises(ScenarioError):
        parse_scenario("/nonexistent/path.json")


def test_build_plan_returns_fresh_objects():
    scenario = parse_scenario(copy.deepcopy(MINIMAL))
    a, b = scenario.build_plan(), scenario.build_plan()
    assert a is not b
    assert a.objectives[0] is not b.objectives[0]
