"""Domain types, validation and unit conversions."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    GapOrOverlap,
    NonPositiveParameter,
    NonPositiveSpeed,
    NonPositiveWidth,
    ParseError,
    RateOutOfRange,
    ValidationError,
)

MPS_PER_MPH = 0.44704
DEFAULT_FRAME_RATE_HZ = 20.0
DEFAULT_SPEEDS_MPH = (25.0, 30.0, 35.0)
DEFAULT_TIMES_S = tuple(round(0.05 * k, 10) for k in range(1, 21))

# Relative tolerance used when comparing segment boundaries and widths.
BOUNDARY_RTOL = 1e-9

Rate = float


def check_rate(value, what="rate") -> float:
    value = float(value)
    if math.isnan(value) or not 0.0 <= value <= 1.0:
        raise RateOutOfRange(f"{what} must lie in [0, 1], got {value!r}")
    return value


def close(a: float, b: float, rtol: float = BOUNDARY_RTOL) -> bool:
    return math.isclose(a, b, rel_tol=rtol, abs_tol=rtol)


def tolerant_ceil(x: float, eps: float = 1e-9) -> int:
    """Ceiling that ignores float noise, so 0.15 * 20 gives 3 and not 4."""
    return math.ceil(x - eps)


def mph_to_mps(speed_mph: float) -> float:
    if not speed_mph > 0:
        raise NonPositiveSpeed(f"speed must be positive, got {speed_mph!r} mph")
    return speed_mph * MPS_PER_MPH


class AttackGoal(Enum):
    HIDING = "hiding"
    APPEARING = "appearing"

    @classmethod
    def parse(cls, value) -> "AttackGoal":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"ha": "hiding", "aa": "appearing", "hide": "hiding", "appear": "appearing"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValidationError(f"unknown attack goal {value!r}") from None


class SignSemantics(Enum):
    """When the display must show the sign for the driver to react to it.

    STOP: at any point before the vehicle reaches the sign.
    SPEED_LIMIT: once the vehicle body is halfway past the sign.
    """

    STOP = "stop"
    SPEED_LIMIT = "speed_limit"

    @classmethod
    def parse(cls, value) -> "SignSemantics":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        if key in ("speedlimit", "speed"):
            key = "speed_limit"
        try:
            return cls(key)
        except ValueError:
            raise ValidationError(f"unknown sign type {value!r}") from None


class PolicyKind(Enum):
    SPATIAL = "spatial"
    TEMPORAL = "temporal"
    REAL_TIME_ONLY = "real_time_only"


@dataclass(frozen=True)
class MemorizationPolicy:
    """How long a detection stays on the display.

    SPATIAL keeps it until the vehicle passes the detected position, no
    matter how much time goes by. TEMPORAL forgets it ``window_s`` seconds
    after the last detection frame. REAL_TIME_ONLY shows only what is
    detected right now.
    """

    kind: PolicyKind
    window_s: float | None = None

    def __post_init__(self):
        if self.kind is PolicyKind.TEMPORAL:
            if self.window_s is None:
                object.__setattr__(self, "window_s", 3.0)
            elif not self.window_s > 0:
                raise NonPositiveParameter(f"temporal window must be positive, got {self.window_s!r}")
        elif self.window_s is not None:
            raise ValidationError(f"{self.kind.value} policy takes no window")

    @classmethod
    def spatial(cls) -> "MemorizationPolicy":
        return cls(PolicyKind.SPATIAL)

    @classmethod
    def temporal(cls, window_s: float = 3.0) -> "MemorizationPolicy":
        return cls(PolicyKind.TEMPORAL, window_s)

    @classmethod
    def real_time_only(cls) -> "MemorizationPolicy":
        return cls(PolicyKind.REAL_TIME_ONLY)

    @classmethod
    def parse(cls, value) -> "MemorizationPolicy":
        """Accept an instance, a name (``"temporal:3"`` allowed) or a JSON-style dict."""
        if isinstance(value, cls):
            return value
        window = None
        if isinstance(value, dict):
            name = value.get("kind", value.get("type"))
            window = value.get("window_s")
        else:
            name, _, rest = str(value).partition(":")
            if rest:
                window = float(rest)
        key = str(name).strip().lower().replace("-", "_")
        key = {"realtime": "real_time_only", "real_time": "real_time_only", "realtimeonly": "real_time_only"}.get(key, key)
        try:
            kind = PolicyKind(key)
        except ValueError:
            raise ValidationError(f"unknown memorization policy {value!r}") from None
        return cls(kind, None if window is None else float(window))

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value}
        if self.window_s is not None:
            d["window_s"] = self.window_s
        return d


@dataclass(frozen=True)
class Segment:
    near_m: float
    far_m: float
    rate: float

    @property
    def width(self) -> float:
        return self.far_m - self.near_m


@dataclass(frozen=True)
class SegmentProfile:
    """Per-distance-segment attack success rates, ordered near to far from the sign."""

    goal: AttackGoal
    segments: tuple[Segment, ...]

    @property
    def n(self) -> int:
        return len(self.segments)

    @property
    def rates(self) -> tuple[float, ...]:
        return tuple(s.rate for s in self.segments)

    @property
    def coverage_m(self) -> float:
        return self.segments[-1].far_m

    @property
    def equal_widths(self) -> bool:
        w0 = self.segments[0].width
        return all(close(s.width, w0) for s in self.segments)

    def with_goal(self, goal: AttackGoal) -> "SegmentProfile":
        return SegmentProfile(AttackGoal.parse(goal), self.segments)

    def to_rows(self) -> list[tuple[float, float, float]]:
        return [(s.near_m, s.far_m, s.rate) for s in self.segments]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["near_m", "far_m", "rate"])
        for row in self.to_rows():
            w.writerow([repr(x) for x in row])
        return buf.getvalue()


def validate_profile(raw_segments: Iterable[Sequence[float]], goal=AttackGoal.HIDING) -> SegmentProfile:
    """Build a SegmentProfile from ``(near_m, far_m, rate)`` triples.

    Rows may arrive in any order; they are sorted by ``near_m`` and must
    then tile ``[0, far_m_last]`` without gaps or overlaps.
    """
    rows = []
    for item in raw_segments:
        if len(item) != 3:
            raise ValidationError(f"segment needs (near_m, far_m, rate), got {item!r}")
        near, far, rate = (float(x) for x in item)
        if not (math.isfinite(near) and math.isfinite(far)):
            raise ValidationError(f"segment bounds must be finite, got {item!r}")
        if not far > near:
            raise NonPositiveWidth(f"segment [{near}, {far}] has non-positive width")
        rows.append(Segment(near, far, check_rate(rate)))
    if not rows:
        raise ValidationError("profile needs at least one segment")
    rows.sort(key=lambda s: s.near_m)
    if not close(rows[0].near_m, 0.0):
        raise GapOrOverlap(f"first segment must start at 0 m, starts at {rows[0].near_m}")
    for prev, nxt in zip(rows, rows[1:]):
        if not close(prev.far_m, nxt.near_m):
            raise GapOrOverlap(
                f"segments [{prev.near_m}, {prev.far_m}] and [{nxt.near_m}, {nxt.far_m}] are not contiguous"
            )
    return SegmentProfile(AttackGoal.parse(goal), tuple(rows))


def uniform_profile(rates: Sequence[float], width_m: float = 5.0, goal=AttackGoal.HIDING) -> SegmentProfile:
    """Equal-width profile starting at the sign; published tables use 5 m bins."""
    return validate_profile(
        [(i * width_m, (i + 1) * width_m, r) for i, r in enumerate(rates)], goal=goal
    )


@dataclass(frozen=True)
class DriveScenario:
    """Straight approach to one sign.

    d_m: detection distance, v_mps: speed, t_s: minimum time to spatially
    memorize a detection, frame_rate_hz: camera cadence.
    """

    d_m: float
    v_mps: float
    t_s: float
    frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ

    def __post_init__(self):
        for name in ("d_m", "v_mps", "t_s", "frame_rate_hz"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                if name == "v_mps":
                    raise NonPositiveSpeed(f"speed must be positive, got {value!r}")
                raise NonPositiveParameter(f"{name} must be positive, got {value!r}")

    @property
    def m(self) -> float:
        """Number of spatial memorization segments, d / (v t); real valued."""
        return self.d_m / (self.v_mps * self.t_s)

    def exponent(self, n: int) -> float:
        if n < 1:
            raise ValidationError(f"segment count must be >= 1, got {n}")
        return self.d_m / (n * self.v_mps * self.t_s)

    @property
    def trigger_frames(self) -> int:
        return max(1, tolerant_ceil(self.t_s * self.frame_rate_hz))

    @property
    def approach_frames(self) -> int:
        return max(1, tolerant_ceil(self.d_m / self.v_mps * self.frame_rate_hz))

    def to_dict(self) -> dict:
        return {"d_m": self.d_m, "speed_mps": self.v_mps, "t_s": self.t_s, "frame_rate_hz": self.frame_rate_hz}


@dataclass(frozen=True)
class SweepGrid:
    speeds_mps: tuple[float, ...]
    times_s: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "speeds_mps", tuple(float(v) for v in self.speeds_mps))
        object.__setattr__(self, "times_s", tuple(float(t) for t in self.times_s))
        if not self.speeds_mps or not self.times_s:
            raise ValidationError("sweep grid needs at least one speed and one time")
        if any(not v > 0 for v in self.speeds_mps):
            raise NonPositiveSpeed(f"grid speeds must be positive: {self.speeds_mps}")
        if any(not t > 0 for t in self.times_s):
            raise NonPositiveParameter(f"grid times must be positive: {self.times_s}")

    @classmethod
    def default(cls) -> "SweepGrid":
        """25/30/35 mph x 0.05..1.00 s in 0.05 s steps: 60 combinations."""
        return cls(tuple(mph_to_mps(s) for s in DEFAULT_SPEEDS_MPH), DEFAULT_TIMES_S)

    @classmethod
    def from_mph(cls, speeds_mph: Sequence[float], times_s: Sequence[float]) -> "SweepGrid":
        return cls(tuple(mph_to_mps(s) for s in speeds_mph), tuple(times_s))

    def points(self) -> list[tuple[float, float]]:
        return [(v, t) for v in self.speeds_mps for t in self.times_s]

    def __len__(self) -> int:
        return len(self.speeds_mps) * len(self.times_s)


# --- file formats -----------------------------------------------------------


def parse_profile_csv(text: str, goal=AttackGoal.HIDING, source=None) -> SegmentProfile:
    """Parse ``near_m,far_m,rate`` CSV text. Parse problems name the line."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty profile file", source=source) from None
    header = [h.strip() for h in header]
    if header != ["near_m", "far_m", "rate"]:
        raise ParseError(f"expected header near_m,far_m,rate, got {','.join(header)}", line=1, source=source)
    raw = []
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", line=lineno, source=source)
        try:
            raw.append(tuple(float(c) for c in row))
        except ValueError:
            raise ParseError(f"non-numeric field in {row!r}", line=lineno, source=source) from None
    if not raw:
        raise ParseError("profile has no segment rows", source=source)
    return validate_profile(raw, goal=goal)


def load_profile(path, goal=AttackGoal.HIDING) -> SegmentProfile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read profile: {exc}", source=str(path)) from None
    return parse_profile_csv(text, goal=goal, source=str(path))


def read_json_object(path) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", source=str(path)) from None
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, source=str(path)) from None
    if not isinstance(data, dict):
        raise ParseError("expected a JSON object", source=str(path))
    return data


def scenario_from_dict(data: dict, d_m: float | None = None) -> DriveScenario:
    try:
        if "speed_mps" in data:
            v = float(data["speed_mps"])
        elif "speed_mph" in data:
            v = mph_to_mps(float(data["speed_mph"]))
        else:
            raise ValidationError("scenario needs speed_mps or speed_mph")
        d = float(data["d_m"]) if "d_m" in data else d_m
        if d is None:
            raise ValidationError("scenario needs d_m")
        return DriveScenario(
            d_m=d,
            v_mps=v,
            t_s=float(data["t_s"]),
            frame_rate_hz=float(data.get("frame_rate_hz", DEFAULT_FRAME_RATE_HZ)),
        )
    except KeyError as exc:
        raise ValidationError(f"scenario is missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad scenario value: {exc}") from None


def grid_from_dict(data: dict) -> SweepGrid:
    try:
        if "speeds_mps" in data:
            speeds = [float(v) for v in data["speeds_mps"]]
        elif "speeds_mph" in data:
            speeds = [mph_to_mps(float(v)) for v in data["speeds_mph"]]
        else:
            speeds = [mph_to_mps(s) for s in DEFAULT_SPEEDS_MPH]
        times = [float(t) for t in data.get("times_s", DEFAULT_TIMES_S)]
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad grid value: {exc}") from None
    return SweepGrid(tuple(speeds), tuple(times))


def load_scenario(path, d_m: float | None = None) -> DriveScenario:
    return scenario_from_dict(read_json_object(path), d_m=d_m)


def load_grid(path) -> tuple[SweepGrid, float | None]:
    """Return the grid and the optional ``d_m`` carried in the same file."""
    data = read_json_object(path)
    d = data.get("d_m")
    return grid_from_dict(data), (None if d is None else float(d))
