import json
import logging
import math
from pathlib import Path

import pytest

from auvsitl.scenario import (
    ParseError,
    Scenario,
    ValidationError,
    default_scenario,
    load_scenario,
    load_scenario_file,
    parse_udp,
    scenario_from_dict,
)

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "data" / "scenarios"


def test_minimal_scenario_takes_defaults():
    scenario = load_scenario('{"objects": []}')
    assert scenario.seed == 0
    assert scenario.duration == 120.0
    assert scenario.objects == ()
    assert scenario.link.latency == 0.005
    assert scenario.initial.position == (0.0, 0.0, 1.0)
    assert scenario.guidance.score_threshold == 0.75
    assert scenario.rc_timeout == 1.0
    assert scenario.udp is None


def test_missing_objects_is_named():
    with pytest.raises(ValidationError) as e:
        load_scenario('{"seed": 3}')
    assert any(err.startswith("objects") for err in e.value.errors)


def test_invalid_fields_are_all_listed():
    text = json.dumps(
        {
            "duration": -5,
            "seed": -1,
            "link": {"bit_corruption_prob": 2.0},
            "guidance": {"pwm_step": 1.5},
            "objects": [{"type": "buoy", "position": [1, 2, 3]}],
        }
    )
    with pytest.raises(ValidationError) as e:
        load_scenario(text)
    joined = " ".join(e.value.errors)
    for key in ("duration", "seed", "link", "guidance.pwm_step", "objects[0].type"):
        assert key in joined
    assert len(e.value.errors) == 5


def test_parse_error_has_position():
    with pytest.raises(ParseError) as e:
        load_scenario('{\n  "seed": 1,\n  "objects": [}\n')
    assert e.value.line == 3
    assert e.value.column > 1


def test_unknown_keys_warn(caplog):
    with caplog.at_level(logging.WARNING):
        scenario = load_scenario('{"objects": [], "colour": "red", "link": {"mtu": 1500}}')
    assert scenario.seed == 0
    assert "colour" in caplog.text
    assert "link.mtu" in caplog.text


def test_wireless_preset_and_seed_follow_through():
    scenario = load_scenario('{"seed": 9, "link": {"preset": "wireless"}, "objects": []}')
    assert scenario.link.latency == 0.03
    assert scenario.link.seed == 9
    explicit = load_scenario('{"link": {"preset": "wireless", "latency": 0.1}, "objects": []}')
    assert explicit.link.latency == 0.1
    with pytest.raises(ValidationError):
        load_scenario('{"link": {"preset": "carrier pigeon"}, "objects": []}')


def test_objects_and_angles():
    scenario = scenario_from_dict(
        {
            "initial": {"attitude_deg": [20, 0, 90]},
            "objects": [
                {"type": "gate", "position": [6, 1, 1.5], "yaw_deg": 90},
                {"type": "flare", "position": [16, 1, 1.5]},
            ],
        }
    )
    assert scenario.initial.attitude == pytest.approx((math.radians(20), 0.0, math.pi / 2))
    gate, flare = scenario.objects
    assert gate.label == "gate"
    assert flare.label == "flare"


def test_thrusters_need_both_keys():
    with pytest.raises(ValidationError):
        scenario_from_dict({"thrusters": {"positions": [[0, 0, 0]] * 6}, "objects": []})


def test_with_overrides():
    scenario = default_scenario().with_overrides(seed=42, duration=10, udp="localhost")
    assert scenario.seed == 42
    assert scenario.link.seed == 42
    assert scenario.duration == 10.0
    assert scenario.udp == ("localhost", 14550)
    assert default_scenario().with_overrides() == default_scenario()
    with pytest.raises(ValidationError):
        default_scenario().with_overrides(duration=0)


def test_parse_udp():
    assert parse_udp("127.0.0.1:14551") == ("127.0.0.1", 14551)
    with pytest.raises(ValidationError):
        parse_udp("host:99999")
    with pytest.raises(ValidationError):
        parse_udp("host:port")


def test_shipped_scenarios_load():
    files = sorted(SCENARIO_DIR.glob("*.json"))
    assert files
    for path in files:
        scenario = load_scenario_file(path)
        assert isinstance(scenario, Scenario)
        assert scenario.name == path.stem


def test_file_stem_names_unnamed_scenario(tmp_path):
    path = tmp_path / "pool_test.json"
    path.write_text('{"objects": []}', encoding="utf-8")
    assert load_scenario_file(path).name == "pool_test"


def test_non_utf8_file_is_a_parse_error(tmp_path):
    path = tmp_path / "latin1.json"
    path.write_bytes(b'{"objects": [],\n "description": "pr\xfcfstand"}')
    with pytest.raises(ParseError) as e:
        load_scenario_file(path)
    assert e.value.line == 2
    assert e.value.column == 20
