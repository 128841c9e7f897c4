"""TSR display state machine and reaction-task judgment.

Positions are measured along the track in meters; ``vehicle_position_m``
is the front bumper.  A STOP sign's reaction need is met once the front
bumper reaches the sign.  A speed-limit sign is shown once the vehicle
body is halfway past it, i.e. front bumper at ``sign + length / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence, Union

from .core import (
    AttackGoal,
    DEFAULT_FRAME_RATE_HZ,
    MemorizationPolicy,
    PolicyKind,
    SignSemantics,
    mph_to_mps,
    tolerant_ceil,
)
from .errors import OutOfOrderEvent, TraceDoesNotReachSign, ValidationError

DEFAULT_VEHICLE_LENGTH_M = 4.5
# The rooftop experiments drove past the sign at the structure's 5 mph limit.
EXPERIMENT_DRIVE_SPEED_MPS = mph_to_mps(5.0)
EXPERIMENT_SIGN_AHEAD_M = 1.5
DEFAULT_TRIGGER_S = 1.0


class AttackOutcome(Enum):
    SYSTEM_LEVEL_SUCCESS = "system_level_success"
    SYSTEM_LEVEL_FAILURE = "system_level_failure"


@dataclass(frozen=True)
class SignInstance:
    semantics: SignSemantics
    position_m: float

    def __post_init__(self):
        if not self.position_m >= 0:
            raise ValidationError(f"sign position must be >= 0, got {self.position_m!r}")


@dataclass(frozen=True)
class DetectionFrame:
    """One camera frame.  ``sign_position_m`` is where the sign was detected."""

    time_s: float
    vehicle_position_m: float
    detected: bool
    sign_position_m: float


@dataclass(frozen=True)
class VehicleMoved:
    time_s: float
    vehicle_position_m: float


Event = Union[DetectionFrame, VehicleMoved]


@dataclass(frozen=True)
class MemorizedSign:
    semantics: SignSemantics
    position_m: float
    first_memorized_at: float


@dataclass(frozen=True)
class DisplayState:
    memorized: MemorizedSign | None = None
    displaying: bool = False
    cleared: bool = False
    # bookkeeping for the trigger rule and temporal expiry
    streak: int = 0
    last_detection_s: float | None = None
    time_s: float | None = None
    vehicle_position_m: float | None = None


def step(
    state: DisplayState,
    event: Event,
    policy: MemorizationPolicy,
    semantics: SignSemantics,
    *,
    trigger_frames: int = 1,
    vehicle_length_m: float = DEFAULT_VEHICLE_LENGTH_M,
) -> DisplayState:
    """Apply one event and return the next state.

    A detection is memorized after ``trigger_frames`` consecutive detected
    frames.  Under REAL_TIME_ONLY the same sustained run is what puts the
    sign on screen, and the screen goes blank on the first missed frame.
    """
    if state.time_s is not None and event.time_s < state.time_s:
        raise OutOfOrderEvent(f"event at t={event.time_s} arrived after t={state.time_s}")
    if state.vehicle_position_m is not None and event.vehicle_position_m < state.vehicle_position_m:
        raise OutOfOrderEvent(
            f"vehicle moved backwards from {state.vehicle_position_m} m to {event.vehicle_position_m} m"
        )
    now = event.time_s
    pos = event.vehicle_position_m
    memorized = state.memorized
    streak = state.streak
    last_det = state.last_detection_s
    cleared = state.cleared
    displaying = state.displaying

    if (
        policy.kind is PolicyKind.TEMPORAL
        and memorized is not None
        and last_det is not None
        and now - last_det > policy.window_s
    ):
        memorized = None

    live = False
    sign_pos = None
    if isinstance(event, DetectionFrame):
        sign_pos = event.sign_position_m
        if event.detected and not cleared and sign_pos > pos:
            streak += 1
            last_det = now
            live = streak >= trigger_frames
            if live and memorized is None and policy.kind is not PolicyKind.REAL_TIME_ONLY:
                memorized = MemorizedSign(semantics, sign_pos, now)
        else:
            streak = 0
    elif policy.kind is PolicyKind.REAL_TIME_ONLY:
        # no new frame: whatever was on screen stays for now
        live = state.displaying and semantics is SignSemantics.STOP and state.streak >= trigger_frames

    if semantics is SignSemantics.STOP:
        if memorized is not None and pos >= memorized.position_m:
            memorized = None
            cleared = True
        if policy.kind is PolicyKind.REAL_TIME_ONLY:
            displaying = live and not cleared
        else:
            displaying = memorized is not None
    else:
        halfway = vehicle_length_m / 2.0
        if memorized is not None and pos >= memorized.position_m + halfway:
            memorized = None
            cleared = True
            displaying = True
        elif policy.kind is PolicyKind.REAL_TIME_ONLY and live and pos >= sign_pos + halfway:
            cleared = True
            displaying = True

    return replace(
        state,
        memorized=memorized,
        displaying=displaying,
        cleared=cleared,
        streak=streak,
        last_detection_s=last_det,
        time_s=now,
        vehicle_position_m=pos,
    )


def run_events(
    events: Iterable[Event],
    policy: MemorizationPolicy,
    semantics: SignSemantics,
    *,
    trigger_frames: int = 1,
    vehicle_length_m: float = DEFAULT_VEHICLE_LENGTH_M,
    state: DisplayState | None = None,
) -> list[DisplayState]:
    """Fold ``step`` over ``events``; returns the state after each event."""
    state = state or DisplayState()
    out = []
    for ev in events:
        state = step(state, ev, policy, semantics, trigger_frames=trigger_frames, vehicle_length_m=vehicle_length_m)
        out.append(state)
    return out


# --- drive traces -------------------------------------------------------------


@dataclass(frozen=True)
class TraceRow:
    time_s: float
    vehicle_position_m: float
    detected: bool


@dataclass(frozen=True)
class DriveTrace:
    rows: tuple[TraceRow, ...]

    def __post_init__(self):
        rows = tuple(r if isinstance(r, TraceRow) else TraceRow(float(r[0]), float(r[1]), bool(r[2])) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        if not rows:
            raise ValidationError("drive trace is empty")
        for a, b in zip(rows, rows[1:]):
            if not b.time_s > a.time_s:
                raise OutOfOrderEvent(f"trace time not strictly increasing at t={b.time_s}")
            if b.vehicle_position_m < a.vehicle_position_m:
                raise OutOfOrderEvent(f"trace position decreases at t={b.time_s}")

    @classmethod
    def from_rows(cls, rows: Sequence) -> "DriveTrace":
        return cls(tuple(rows))


def _requirement_position(sign: SignInstance, vehicle_length_m: float) -> float:
    if sign.semantics is SignSemantics.STOP:
        return sign.position_m
    return sign.position_m + vehicle_length_m / 2.0


def reaction_requirement_met(
    trace: DriveTrace,
    sign: SignInstance,
    policy: MemorizationPolicy,
    *,
    trigger_frames: int = 1,
    vehicle_length_m: float = DEFAULT_VEHICLE_LENGTH_M,
) -> bool:
    """Whether the display serves the driver's reaction to ``sign``.

    STOP: the sign is on screen at some frame before the vehicle reaches it.
    SPEED_LIMIT: the sign is on screen once the vehicle is halfway past it.
    """
    target = _requirement_position(sign, vehicle_length_m)
    if trace.rows[-1].vehicle_position_m < target:
        raise TraceDoesNotReachSign(
            f"trace ends at {trace.rows[-1].vehicle_position_m} m, needs to reach {target} m"
        )
    state = DisplayState()
    for row in trace.rows:
        ev = DetectionFrame(row.time_s, row.vehicle_position_m, row.detected, sign.position_m)
        state = step(state, ev, policy, sign.semantics, trigger_frames=trigger_frames, vehicle_length_m=vehicle_length_m)
        if sign.semantics is SignSemantics.STOP:
            if row.vehicle_position_m < sign.position_m and state.displaying:
                return True
            if row.vehicle_position_m >= sign.position_m:
                return False
        elif row.vehicle_position_m >= target:
            return state.displaying
    return False


def reaction_task_outcome(
    trace: DriveTrace,
    sign: SignInstance,
    policy: MemorizationPolicy,
    goal: AttackGoal = AttackGoal.HIDING,
    *,
    trigger_frames: int = 1,
    vehicle_length_m: float = DEFAULT_VEHICLE_LENGTH_M,
) -> AttackOutcome:
    """Hiding succeeds iff the reaction requirement is missed; appearing iff it is met."""
    met = reaction_requirement_met(
        trace, sign, policy, trigger_frames=trigger_frames, vehicle_length_m=vehicle_length_m
    )
    success = met if AttackGoal.parse(goal) is AttackGoal.APPEARING else not met
    return AttackOutcome.SYSTEM_LEVEL_SUCCESS if success else AttackOutcome.SYSTEM_LEVEL_FAILURE


# --- scripted display experiments ---------------------------------------------


@dataclass(frozen=True)
class DisplayRun:
    memorized: bool
    requirement_met: bool
    timeline: tuple[dict, ...]


def _visible_at(script: Sequence[tuple[float, bool]], t: float) -> bool:
    visible = False
    for start, vis in script:
        if start <= t + 1e-12:
            visible = vis
        else:
            break
    return visible


def simulate_display(
    script: Sequence[tuple[float, bool]],
    drive_start_s: float,
    sign: SignInstance,
    policy: MemorizationPolicy,
    *,
    vehicle_start_m: float = 0.0,
    speed_mps: float = EXPERIMENT_DRIVE_SPEED_MPS,
    frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ,
    trigger_frames: int | None = None,
    vehicle_length_m: float = DEFAULT_VEHICLE_LENGTH_M,
) -> DisplayRun:
    """Stationary-then-drive experiment.

    The vehicle waits at ``vehicle_start_m`` while the sign's visibility
    follows ``script`` (piecewise constant, ``(t_s, visible)`` change
    points), then drives past the sign at ``speed_mps`` from
    ``drive_start_s``.  Frames are sampled at ``frame_rate_hz`` and the
    sign is detected whenever it is visible and still ahead.

    ``memorized`` follows the experiment's reading: for STOP the display
    stays on right up to the sign, for speed limits it comes on after
    passing.
    """
    if not speed_mps > 0:
        raise ValidationError("drive speed must be positive")
    if sign.position_m <= vehicle_start_m:
        raise ValidationError("sign must be ahead of the vehicle's start position")
    script = sorted((float(t), bool(v)) for t, v in script)
    if trigger_frames is None:
        trigger_frames = max(1, tolerant_ceil(DEFAULT_TRIGGER_S * frame_rate_hz))
    target = _requirement_position(sign, vehicle_length_m)
    end_pos = target + vehicle_length_m
    end_time = drive_start_s + (end_pos - vehicle_start_m) / speed_mps

    state = DisplayState()
    timeline: list[dict] = []
    shown_before_pass = False
    shown_after_halfway = None
    k = 0
    while True:
        t = k / frame_rate_hz
        if t > end_time + 1e-12:
            break
        pos = vehicle_start_m + max(0.0, t - drive_start_s) * speed_mps
        detected = _visible_at(script, t) and pos < sign.position_m
        prev = state
        state = step(
            state,
            DetectionFrame(t, pos, detected, sign.position_m),
            policy,
            sign.semantics,
            trigger_frames=trigger_frames,
            vehicle_length_m=vehicle_length_m,
        )
        if k == 0 or (prev.memorized is None) != (state.memorized is None) or prev.displaying != state.displaying:
            timeline.append(
                {
                    "t_s": round(t, 9),
                    "vehicle_position_m": round(pos, 9),
                    "detected": detected,
                    "memorized": state.memorized is not None,
                    "displaying": state.displaying,
                }
            )
        if pos < sign.position_m:
            shown_before_pass = state.displaying
        if shown_after_halfway is None and pos >= target:
            shown_after_halfway = state.displaying
        k += 1

    if sign.semantics is SignSemantics.STOP:
        met = shown_before_pass
    else:
        met = bool(shown_after_halfway)
    return DisplayRun(memorized=met, requirement_met=met, timeline=tuple(timeline))


def run_display_experiment(
    display_time: float,
    disappear_time: float,
    policy: MemorizationPolicy,
    semantics: SignSemantics,
    *,
    frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ,
    trigger_s: float = DEFAULT_TRIGGER_S,
    sign_ahead_m: float = EXPERIMENT_SIGN_AHEAD_M,
    speed_mps: float = EXPERIMENT_DRIVE_SPEED_MPS,
    vehicle_length_m: float = DEFAULT_VEHICLE_LENGTH_M,
) -> bool:
    """Show the sign for ``display_time`` s, hide it for ``disappear_time`` s, drive past.

    Returns whether the detection was still memorized at drive-past.
    """
    if not display_time > 0:
        raise ValidationError("display_time must be positive")
    if not disappear_time >= 0:
        raise ValidationError("disappear_time must be >= 0")
    run = simulate_display(
        [(0.0, True), (display_time, False)],
        display_time + disappear_time,
        SignInstance(SignSemantics.parse(semantics), sign_ahead_m),
        MemorizationPolicy.parse(policy),
        speed_mps=speed_mps,
        frame_rate_hz=frame_rate_hz,
        trigger_frames=max(1, tolerant_ceil(trigger_s * frame_rate_hz)),
        vehicle_length_m=vehicle_length_m,
    )
    return run.memorized
