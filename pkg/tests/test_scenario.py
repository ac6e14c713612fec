from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmsim.engine import BUILTIN_SCENARIOS, SimConfig, builtin_config, set_param, simulate
from pmsim.scenario import ScenarioError, parse_scenario, serialize_scenario

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"


def test_empty_document_is_posture_scenario():
    assert parse_scenario("") == builtin_config("posture")
    assert parse_scenario("# nothing here\n\n") == builtin_config("posture")


def test_apa_document():
    text = """
    [posture]
    apa = pulse 3 5 -0.5   # inhibitory
    [movement]
    target = pulse 5 7 5
    """
    assert parse_scenario(text) == builtin_config("pm_apa")


@pytest.mark.parametrize("scenario", BUILTIN_SCENARIOS)
def test_shipped_files_match_builtin_configs(scenario):
    text = (SCENARIO_DIR / f"{scenario}.scn").read_text()
    assert parse_scenario(text) == builtin_config(scenario)


@pytest.mark.parametrize("scenario", BUILTIN_SCENARIOS)
def test_round_trip(scenario):
    config = builtin_config(scenario)
    text = serialize_scenario(config)
    assert parse_scenario(text) == config
    assert serialize_scenario(parse_scenario(text)) == text


def test_round_trip_keeps_decimal_ts_exact():
    config = set_param(builtin_config("pm_apa"), "simulation.ts", 0.01)
    again = parse_scenario(serialize_scenario(config))
    assert again.ts == 0.01
    assert again == config


def test_round_trip_of_edited_config():
    config = builtin_config("pm_apa")
    for path, value in [("posture.kp", 0.1 + 0.2), ("movement.qw", 1 / 3), ("plant.num", "0.7"),
                        ("disturbance", "sum(step 2 -1 ; pulse 4 6 0.25)"), ("movement.h", 0.1)]:
        config = set_param(config, path, value)
    assert parse_scenario(serialize_scenario(config)) == config


def test_second_order_plant_document():
    text = "[plant]\nnum = 1\nden = 1 -0.2 0.1\n"
    config = parse_scenario(text)
    assert config.plant.order == 2
    assert config.x0 == (0.0, 0.0)
    assert config.posture.noise.g.ravel().tolist() == [0.2, 0.2]
    simulate(config)


def test_empty_document_behaves_like_posture():
    assert simulate(parse_scenario("")).identical(simulate(builtin_config("posture")))


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("[plant]\nden = 1\n", 2, "degree"),
        ("[posture]\nkq = 1\n", 2, "kq"),
        ("[posture]\nkp = 1\nkp = 2\n", 3, "duplicate"),
        ("[posture]\nkp = 0.5x\n", 2, "malformed"),
        ("[movement]\ntarget = pulse 7 5 5\n", 2, "onset"),
        ("[plant]\nnum = 1 2 3\nden = 1 0.5\n", 3, "improper"),
        ("[gravity]\n", 1, "unknown section"),
        ("[posture]\n[posture]\n", 2, "twice"),
        ("kp = 1\n", 1, "before any section"),
        ("[posture]\njust words\n", 2, "expected"),
        ("[posture]\nkp =\n", 2, "missing value"),
        ("[simulation]\nts = 0\n", 2, "ts"),
        ("[posture]\nrv = 0\n", 2, "rv"),
        ("[plant]\nx0 = 1 2\n", 2, "x0"),
        ("[movement]\nkd = 1\nn = 0\n", 3, "filter"),
    ],
)
def test_errors_carry_line(text, line, fragment):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    assert info.value.line == line
    assert fragment in str(info.value)


def test_serialize_rejects_internal_model_override():
    import dataclasses

    from pmsim.lti import StateSpaceModel

    config = builtin_config("posture")
    loop = dataclasses.replace(config.posture, internal_model=StateSpaceModel([[0.1]], [1], [1]))
    with pytest.raises(ValueError):
        serialize_scenario(dataclasses.replace(config, posture=loop))


alphabet = st.sampled_from(list("[]=#;() \n\t.-+eE0123456789abcdefgkmnpqrstuvwxyz_"))
fragments = st.sampled_from([
    "[simulation]", "[plant]", "[posture]", "[movement]", "[disturbance]", "ts = ", "duration = ",
    "num = ", "den = ", "x0 = ", "target = ", "apa = ", "kp = ", "qw = ", "g = ", "signal = ",
    "pulse ", "step ", "constant ", "sum(", ";", ")", "0", "1", "-0.5", "5", "1e400", "\n",
])


@settings(max_examples=300, deadline=None)
@given(st.one_of(st.text(alphabet, max_size=120), st.lists(fragments, max_size=40).map("".join)))
def test_parser_is_total(text):
    try:
        config = parse_scenario(text)
    except ScenarioError:
        return
    assert isinstance(config, SimConfig)
