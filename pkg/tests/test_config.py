import math

import pytest

from phasegait.config import (
    ALL_KEYS,
    ConfigError,
    build_gains,
    build_phase_config,
    build_plant,
    build_scenario,
    format_config,
    load_config,
    parse_config,
    write_config,
)
from phasegait.control import DEFAULT_KNEE_GAINS


def test_parse_with_comments():
    v = parse_config("# run\nq_h0_deg = 21  # raised\n\nkind=kick\nn_strides=4\n")
    assert v == {"q_h0_deg": 21.0, "kind": "kick", "n_strides": 4}


@pytest.mark.parametrize("text,msg", [
    ("bogus=1", "unknown key"),
    ("c=0.5\nc=0.6", "duplicate"),
    ("c 0.5", "expected key=value"),
    ("c=half", "expects a number"),
    ("n_strides=2.5", "expects a number"),
])
def test_parse_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


def test_round_trip(tmp_path):
    values = {"c": 0.5, "knee_kp": 2.0, "kind": "backward_walk", "seed": 3, "amplitude": None}
    write_config(values, tmp_path / "run.cfg")
    back = load_config(tmp_path / "run.cfg")
    assert back == {"c": 0.5, "knee_kp": 2.0, "kind": "backward_walk", "seed": 3}
    assert format_config(back) == (tmp_path / "run.cfg").read_text()


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")


def test_builders_defaults():
    assert build_phase_config({}).c == 0.53
    knee, ankle = build_gains({})
    assert knee == DEFAULT_KNEE_GAINS and ankle.kp == 4.0
    assert build_plant({}).mode == "perfect_tracking"
    assert build_scenario({}).kind == "forward_walk"


def test_rad_gains_convert_and_require_values():
    with pytest.raises(ConfigError, match="explicit gains"):
        build_gains({"units": "rad"})
    knee, _ = build_gains({"units": "rad", "knee_kp": 180.0, "knee_kd": 18.0,
                           "ankle_kp": 90.0, "ankle_kd": 9.0})
    assert knee.kp == pytest.approx(math.pi) and knee.kd == pytest.approx(math.pi / 10)
    with pytest.raises(ConfigError):
        build_gains({"units": "grad"})


def test_builder_validation_surfaces_as_config_error():
    with pytest.raises(ConfigError):
        build_phase_config({"c": 1.5})
    with pytest.raises(ConfigError):
        build_plant({"plant_mode": "ideal"})
    with pytest.raises(ConfigError):
        build_scenario({"kind": "moonwalk"})


def test_every_key_is_unique():
    assert len(set(ALL_KEYS)) == len(ALL_KEYS)
