import json
import math

import pytest
from hypothesis import given, strategies as st

from sysmem.core import (
    AttackGoal,
    DriveScenario,
    MemorizationPolicy,
    PolicyKind,
    SignSemantics,
    SweepGrid,
    load_grid,
    load_scenario,
    mph_to_mps,
    parse_profile_csv,
    uniform_profile,
    validate_profile,
)
from sysmem.errors import (
    GapOrOverlap,
    NonPositiveParameter,
    NonPositiveSpeed,
    NonPositiveWidth,
    ParseError,
    RateOutOfRange,
    ValidationError,
)


def test_mph_conversion_is_exact_legal_factor():
    assert mph_to_mps(25) == 25 * 0.44704
    assert mph_to_mps(1) == 0.44704
    with pytest.raises(NonPositiveSpeed):
        mph_to_mps(0)


def test_profile_sorted_and_contiguous():
    p = validate_profile([(5, 10, 0.2), (0, 5, 0.1)])
    assert p.rates == (0.1, 0.2)
    assert p.coverage_m == 10
    assert p.equal_widths


@pytest.mark.parametrize(
    "rows, exc",
    [
        ([(0, 5, 0.1), (6, 10, 0.2)], GapOrOverlap),
        ([(0, 5, 0.1), (4, 10, 0.2)], GapOrOverlap),
        ([(1, 5, 0.1)], GapOrOverlap),
        ([(0, 5, 1.2)], RateOutOfRange),
        ([(0, 5, -0.1)], RateOutOfRange),
        ([(0, 0, 0.1)], NonPositiveWidth),
        ([], ValidationError),
    ],
)
def test_profile_rejects_bad_rows(rows, exc):
    with pytest.raises(exc):
        validate_profile(rows)


def test_unequal_widths_flagged():
    assert not validate_profile([(0, 10, 0.0), (10, 30, 0.9)]).equal_widths


def test_scenario_m_and_exponent():
    s = DriveScenario(30, 15, 1)
    assert s.m == 2
    assert s.exponent(6) == pytest.approx(1 / 3)
    s = DriveScenario(30, 13.411, 0.7)
    assert s.m == pytest.approx(3.1957, abs=1e-4)


@pytest.mark.parametrize("field", ["d_m", "t_s", "frame_rate_hz"])
def test_scenario_rejects_nonpositive(field):
    kwargs = dict(d_m=30, v_mps=10, t_s=1, frame_rate_hz=20)
    kwargs[field] = 0
    with pytest.raises(NonPositiveParameter):
        DriveScenario(**kwargs)
    with pytest.raises(NonPositiveSpeed):
        DriveScenario(30, -1, 1)


@given(
    d=st.floats(0.1, 500),
    v=st.floats(0.1, 50),
    t=st.floats(0.01, 5),
    n=st.integers(1, 32),
)
def test_scenario_m_positive(d, v, t, n):
    s = DriveScenario(d, v, t)
    assert s.m > 0 and s.exponent(n) > 0


def test_trigger_frames_tolerates_float_noise():
    assert DriveScenario(30, 10, 0.15).trigger_frames == 3
    assert DriveScenario(30, 10, 1.0).trigger_frames == 20
    assert DriveScenario(30, 10, 0.01).trigger_frames == 1


def test_default_grid():
    g = SweepGrid.default()
    assert len(g) == 60
    assert g.times_s[0] == 0.05 and g.times_s[-1] == 1.0
    assert g.speeds_mps == tuple(s * 0.44704 for s in (25, 30, 35))


def test_policy_parse_forms():
    assert MemorizationPolicy.parse("spatial") == MemorizationPolicy.spatial()
    assert MemorizationPolicy.parse("temporal:5").window_s == 5
    assert MemorizationPolicy.parse({"kind": "temporal"}).window_s == 3
    assert MemorizationPolicy.parse("RealTimeOnly").kind is PolicyKind.REAL_TIME_ONLY
    with pytest.raises(ValidationError):
        MemorizationPolicy.parse("forever")
    with pytest.raises(NonPositiveParameter):
        MemorizationPolicy.temporal(0)


def test_enum_parsing():
    assert AttackGoal.parse("HA") is AttackGoal.HIDING or AttackGoal.parse("hiding") is AttackGoal.HIDING
    assert SignSemantics.parse("stop") is SignSemantics.STOP
    assert SignSemantics.parse("speed_limit") is SignSemantics.SPEED_LIMIT


def test_csv_parse_reports_line_number():
    with pytest.raises(ParseError) as info:
        parse_profile_csv("near_m,far_m,rate\n0,5,0.1\n5,10,oops\n")
    assert info.value.line == 3
    with pytest.raises(ParseError):
        parse_profile_csv("a,b,c\n0,5,0.1\n")
    with pytest.raises(ParseError):
        parse_profile_csv("")


@given(st.lists(st.floats(0, 1), min_size=1, max_size=12), st.floats(0.5, 20))
def test_csv_round_trip(rates, width):
    p = uniform_profile(rates, width)
    assert parse_profile_csv(p.to_csv()) == p


def test_scenario_and_grid_files(tmp_path):
    s = tmp_path / "s.json"
    s.write_text(json.dumps({"d_m": 30, "speed_mph": 30, "t_s": 0.5}))
    sc = load_scenario(s)
    assert sc.v_mps == 30 * 0.44704 and sc.frame_rate_hz == 20
    g = tmp_path / "g.json"
    g.write_text(json.dumps({"speeds_mph": [25], "times_s": [0.5, 1.0], "d_m": 25}))
    grid, d = load_grid(g)
    assert len(grid) == 2 and d == 25
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError):
        load_scenario(bad)
    missing = tmp_path / "m.json"
    missing.write_text(json.dumps({"d_m": 30, "t_s": 1}))
    with pytest.raises(ValidationError):
        load_scenario(missing)


def test_value_types_are_frozen():
    s = DriveScenario(30, 10, 1)
    with pytest.raises(AttributeError):
        s.d_m = 5
    assert math.isclose(s.to_dict()["speed_mps"], 10)
