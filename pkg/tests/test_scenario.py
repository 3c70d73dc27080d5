import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from balsi import scenario as scn
from balsi.errors import ParseError, ValidationError

MINIMAL = """\
[plant]
name = "wing_rock"
theta = [-26.67, 0.76485, -2.9225, 0.0, 1.5]
x0 = [0.4, 0.0, 0.0]
"""


def test_preset_catalogue():
    assert set(scn.preset_names()) == {
        "lti_chain_n2", "wingrock_ic1", "wingrock_ic1_em", "wingrock_ic1_noisy",
        "wingrock_ic2", "wingrock_ic2_em", "wingrock_ic2_noisy", "wingrock_open_loop"}


@pytest.mark.parametrize("name, x0", [("wingrock_ic1", [-0.35, -0.5, 0.05]),
                                      ("wingrock_ic2", [0.4, 0.0, 0.0])])
def test_preset_initial_conditions(name, x0):
    sc = scn.preset(name)
    assert sc.plant.x0 == x0
    np.testing.assert_allclose(sc.theta_hat0, 1.35 * np.array(sc.plant.theta), rtol=1e-15)


def test_every_preset_validates():
    for name in scn.preset_names():
        assert scn.validate(scn.preset(name)).name == name


def test_unknown_preset():
    with pytest.raises(ValidationError, match="available"):
        scn.preset("nope")


def test_defaults_fill_missing_sections():
    sc = scn.loads(MINIMAL)
    assert sc.controller.kind == "balsi_regularized"
    assert sc.trigger == scn.TriggerSection()
    np.testing.assert_array_equal(sc.theta_hat0, sc.plant.theta)


def test_negative_period_rejected():
    with pytest.raises(ValidationError, match="trigger.T"):
        scn.loads(MINIMAL + "[trigger]\nT = -1.0\n")


def test_unknown_key_reports_line():
    text = MINIMAL + "[trigger]\nT = 0.4\nB3 = 1.0\n"
    with pytest.raises(ParseError) as info:
        scn.loads(text)
    assert info.value.lineno == 7
    assert "trigger.B3" in str(info.value)


def test_unknown_section_reports_line():
    with pytest.raises(ParseError) as info:
        scn.loads(MINIMAL + "\n[solver]\nx = 1\n")
    assert info.value.lineno == 6


def test_type_errors_report_line():
    with pytest.raises(ParseError) as info:
        scn.loads(MINIMAL.replace("x0 = [0.4, 0.0, 0.0]", 'x0 = "up"'))
    assert info.value.lineno == 4


def test_toml_syntax_error():
    with pytest.raises(ParseError):
        scn.loads("[plant\nname = 1\n")


def test_missing_plant_section():
    with pytest.raises(ValidationError):
        scn.loads("[trigger]\nT = 0.4\n")


@pytest.mark.parametrize("section, key, value, match", [
    ("plant", "theta", [1.0, 2.0], "plant.theta"),
    ("plant", "x0", [0.0, float("nan"), 0.0], "plant.x0"),
    ("plant", "name", "pendulum", "plant.name"),
    ("controller", "kind", "mrac", "controller.kind"),
    ("controller", "L", 1.0, "controller.L"),
    ("controller", "theta_hat0", [-26.67, 0.76485, -2.9225, 0.0, 0.5], "admissible"),
    ("controller", "rank_tol", 0.1, "rank_tol"),
    ("controller", "qp_method", "simplex", "qp_method"),
    ("controller", "reinit_period", -1.0, "reinit_period"),
    ("trigger", "A2", 0.0, "A2"),
    ("trigger", "A4", -1.0, "A4"),
    ("noise", "amplitude", -0.1, "amplitude"),
    ("integrator", "event_tol", 1.0, "event_tol"),
    ("output", "t_final", 0.0, "t_final"),
])
def test_validation_names_the_invariant(section, key, value, match):
    sc = scn.preset("wingrock_ic1")
    setattr(getattr(sc, section), key, value)
    with pytest.raises(ValidationError, match=match):
        scn.validate(sc)


def test_extended_matching_requires_wing_rock():
    sc = scn.preset("lti_chain_n2")
    sc.controller.kind = "extended_matching"
    with pytest.raises(ValidationError):
        scn.validate(sc)


@pytest.mark.parametrize("name", scn.preset_names())
def test_dump_load_round_trip(name):
    sc = scn.preset(name)
    again = scn.loads(scn.dumps(sc), name=name)
    assert again == sc


finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_subnormal=False)


@settings(max_examples=60, deadline=None)
@given(x0=st.lists(finite, min_size=3, max_size=3),
       T=st.floats(min_value=1e-6, max_value=10.0),
       A2=st.floats(min_value=1e-9, max_value=1e9),
       amp=st.floats(min_value=0.0, max_value=1.0),
       seed=st.integers(min_value=0, max_value=2**31))
def test_round_trip_is_exact(x0, T, A2, amp, seed):
    sc = scn.preset("wingrock_ic1_noisy")
    sc = dataclasses.replace(
        sc,
        plant=dataclasses.replace(sc.plant, x0=x0),
        trigger=dataclasses.replace(sc.trigger, T=T, A2=A2),
        noise=dataclasses.replace(sc.noise, amplitude=amp),
        output=dataclasses.replace(sc.output, seed=seed))
    again = scn.loads(scn.dumps(sc), name=sc.name)
    assert again == sc


def test_load_from_file(tmp_path):
    path = tmp_path / "demo.toml"
    path.write_text(scn.preset_text("wingrock_ic2"))
    sc = scn.load(path)
    assert sc.name == "demo" and sc.plant.x0 == [0.4, 0.0, 0.0]
