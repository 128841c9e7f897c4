import numpy as np
import pytest
from hypothesis import given, strategies as st

from sysmem.core import AttackGoal, MemorizationPolicy, SignSemantics
from sysmem.errors import OutOfOrderEvent, TraceDoesNotReachSign, ValidationError
from sysmem.memorization import (
    AttackOutcome,
    DetectionFrame,
    DisplayState,
    DriveTrace,
    SignInstance,
    VehicleMoved,
    reaction_task_outcome,
    run_display_experiment,
    run_events,
    simulate_display,
    step,
)
from sysmem.metrics import SpatialSegmentation
from sysmem.oracle import exact_segment_oracle
from sysmem.rng import uniform_block

STOP, SPEED = SignSemantics.STOP, SignSemantics.SPEED_LIMIT
SPATIAL = MemorizationPolicy.spatial()
TEMPORAL = MemorizationPolicy.temporal(3)
REALTIME = MemorizationPolicy.real_time_only()


def det(t, pos, seen=True, sign=10.0):
    return DetectionFrame(t, pos, seen, sign)


def test_spatial_stop_survives_long_idle():
    s = step(DisplayState(), det(0, 0), SPATIAL, STOP)
    s = step(s, VehicleMoved(60, 0), SPATIAL, STOP)
    assert s.memorized is not None and s.displaying
    s = step(s, VehicleMoved(61, 10), SPATIAL, STOP)
    assert s.memorized is None and s.cleared and not s.displaying


def test_realtime_blank_after_detection_ends():
    s = step(DisplayState(), det(0, 0), REALTIME, STOP)
    assert s.displaying and s.memorized is None
    s = step(s, det(0.05, 0, seen=False), REALTIME, STOP)
    assert not s.displaying


def test_temporal_expires_after_window():
    s = step(DisplayState(), det(0, 0), TEMPORAL, STOP)
    s = step(s, VehicleMoved(20, 0), TEMPORAL, STOP)
    assert s.memorized is None and not s.displaying
    s = step(DisplayState(), det(0, 0), TEMPORAL, STOP)
    assert step(s, VehicleMoved(2.9, 0), TEMPORAL, STOP).memorized is not None


def test_speed_limit_displays_after_halfway():
    s = step(DisplayState(), det(0, 0), SPATIAL, SPEED, vehicle_length_m=4)
    assert s.memorized is not None and not s.displaying
    s = step(s, VehicleMoved(5, 11.9), SPATIAL, SPEED, vehicle_length_m=4)
    assert not s.displaying
    s = step(s, VehicleMoved(6, 12.0), SPATIAL, SPEED, vehicle_length_m=4)
    assert s.displaying and s.cleared and s.memorized is None


def test_trigger_requires_consecutive_frames():
    events = [det(0, 0), det(0.05, 0), det(0.1, 0, seen=False), det(0.15, 0), det(0.2, 0), det(0.25, 0)]
    states = run_events(events, SPATIAL, STOP, trigger_frames=3)
    assert [s.memorized is not None for s in states] == [False] * 5 + [True]


def test_detections_behind_the_vehicle_ignored():
    s = step(DisplayState(), det(0, 12.0), SPATIAL, STOP)
    assert s.memorized is None


def test_out_of_order_events_rejected():
    s = step(DisplayState(), det(1, 5), SPATIAL, STOP)
    with pytest.raises(OutOfOrderEvent):
        step(s, VehicleMoved(0.5, 5), SPATIAL, STOP)
    with pytest.raises(OutOfOrderEvent):
        step(s, VehicleMoved(2, 4), SPATIAL, STOP)
    with pytest.raises(OutOfOrderEvent):
        DriveTrace.from_rows([(0, 0, False), (0, 1, False)])


def test_display_experiment_examples():
    assert run_display_experiment(1, 60, SPATIAL, SPEED)
    assert run_display_experiment(1, 60, SPATIAL, STOP)
    assert not run_display_experiment(3, 20, REALTIME, STOP)
    assert run_display_experiment(1, 2, TEMPORAL, STOP)
    assert not run_display_experiment(1, 20, TEMPORAL, STOP)
    with pytest.raises(ValidationError):
        run_display_experiment(0, 20, SPATIAL, STOP)


def test_simulate_display_timeline_records_transitions():
    run = simulate_display([(0, True), (1, False)], 5, SignInstance(STOP, 1.5), SPATIAL)
    flags = [(row["memorized"], row["displaying"]) for row in run.timeline]
    assert flags[0] == (False, False)
    assert (True, True) in flags
    assert flags[-1] == (False, False)


def _trace(n, sign_pos, detected):
    rows = [(k * 0.05, k * sign_pos / n, bool(d)) for k, d in enumerate(detected)]
    rows.append((n * 0.05, sign_pos, False))
    return DriveTrace.from_rows(rows)


def test_reaction_outcome_examples():
    sign = SignInstance(STOP, 30.0)
    single = [False] * 20
    single[10] = True
    assert reaction_task_outcome(_trace(20, 30.0, single), sign, SPATIAL) is AttackOutcome.SYSTEM_LEVEL_FAILURE
    assert reaction_task_outcome(_trace(20, 30.0, [False] * 20), sign, SPATIAL) is AttackOutcome.SYSTEM_LEVEL_SUCCESS

    limit = SignInstance(SPEED, 30.0)
    far_half = [k < 10 for k in range(20)]
    rows = [(k * 0.05, k * 1.5, d) for k, d in enumerate(far_half)] + [(1.0, 30.0, False), (1.2, 32.25, False)]
    out = reaction_task_outcome(DriveTrace.from_rows(rows), limit, SPATIAL, AttackGoal.APPEARING)
    assert out is AttackOutcome.SYSTEM_LEVEL_SUCCESS


def test_trace_must_reach_sign():
    with pytest.raises(TraceDoesNotReachSign):
        reaction_task_outcome(DriveTrace.from_rows([(0, 0, True), (1, 5, False)]), SignInstance(STOP, 30), SPATIAL)


@given(st.lists(st.booleans(), min_size=1, max_size=40), st.integers(1, 4), st.floats(0.05, 5))
def test_policy_inclusion(detected, trigger, dt):
    window = MemorizationPolicy.temporal(3)
    events = [det(k * dt, k * 0.1, d, sign=100.0) for k, d in enumerate(detected)]
    shown = {
        p: [s.displaying for s in run_events(events, p, STOP, trigger_frames=trigger)]
        for p in (SPATIAL, window, REALTIME)
    }
    for rt, tm, sp in zip(shown[REALTIME], shown[window], shown[SPATIAL]):
        assert (not rt or tm) and (not tm or sp)


@given(st.lists(st.tuples(st.booleans(), st.floats(0, 100)), min_size=1, max_size=30))
def test_state_is_a_function_of_the_event_sequence(steps):
    t, events = 0.0, []
    for k, (seen, gap) in enumerate(steps):
        t += gap
        events.append(det(t, k * 0.2, seen))
    assert run_events(events, TEMPORAL, STOP) == run_events(list(events), TEMPORAL, STOP)


def test_segment_aligned_traces_match_exact_oracle_per_trial():
    # one frame per memorization segment; a hiding attack wins a segment when u < f
    rates = np.array([0.9, 0.6, 0.95, 0.8])
    m, d = len(rates), 20.0
    u = uniform_block(11, 0, 500, m)
    sign = SignInstance(STOP, d)
    for row in u:
        won = row < rates
        trace = _trace(m, d, ~won)
        outcome = reaction_task_outcome(trace, sign, SPATIAL)
        indicator = bool(won.all())
        assert (outcome is AttackOutcome.SYSTEM_LEVEL_SUCCESS) == indicator
    assert exact_segment_oracle(SpatialSegmentation.from_rates(rates), AttackGoal.HIDING).rate == pytest.approx(
        np.prod(rates)
    )
