"""Model-level and system-level attack success metrics.

System-level metrics account for spatial memorization: a hiding attack has
to win in every stretch of road long enough for the TSR to memorize the
sign, while an appearing attack only has to win once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import (
    AttackGoal,
    DriveScenario,
    SegmentProfile,
    close,
)
from .errors import (
    CoverageMismatch,
    DegenerateCount,
    SegmentationMismatch,
    UnequalWidths,
    WrongGoal,
)


@dataclass(frozen=True)
class SpatialSegmentation:
    """The approach split into ``count`` equal memorization segments of ``width_m``.

    ``rates`` is ordered near to far, like the source profile. ``m_real`` is
    the unrounded d / (v t) and ``rounding_gap`` = |m_real - count|.
    """

    count: int
    width_m: float
    rates: tuple[float, ...]
    m_real: float
    rounding_gap: float

    @classmethod
    def from_rates(cls, rates, width_m: float = 1.0) -> "SpatialSegmentation":
        rates = tuple(float(r) for r in rates)
        return cls(len(rates), width_m, rates, float(len(rates)), 0.0)


def model_level_rate(profile: SegmentProfile) -> float:
    """Width-weighted mean of the segment rates."""
    total = sum(s.width for s in profile.segments)
    value = math.fsum(s.width * s.rate for s in profile.segments) / total
    return min(1.0, max(0.0, value))


def _check_coverage(profile: SegmentProfile, scenario: DriveScenario) -> None:
    if not close(profile.coverage_m, scenario.d_m):
        raise CoverageMismatch(
            f"profile covers [0, {profile.coverage_m}] m but scenario detection distance is {scenario.d_m} m"
        )


def map_to_spatial_segments(profile: SegmentProfile, scenario: DriveScenario) -> SpatialSegmentation:
    """Resample a measurement profile onto round(d / (v t)) memorization segments.

    A memorization segment that straddles several measurement segments gets
    their overlap-length-weighted average rate.
    """
    _check_coverage(profile, scenario)
    m_real = scenario.m
    count = int(round(m_real))
    if count < 1:
        raise DegenerateCount(f"d/(vt) = {m_real:.6g} rounds to zero memorization segments")
    d = scenario.d_m
    width = d / count
    rates = []
    for j in range(count):
        lo, hi = j * width, (j + 1) * width if j < count - 1 else d
        acc = 0.0
        span = 0.0
        for seg in profile.segments:
            overlap = min(hi, seg.far_m) - max(lo, seg.near_m)
            if overlap > 0:
                acc += overlap * seg.rate
                span += overlap
        rates.append(min(1.0, max(0.0, acc / span)))
    return SpatialSegmentation(count, width, tuple(rates), m_real, abs(m_real - count))


def _require(profile: SegmentProfile, goal: AttackGoal) -> None:
    if profile.goal is not goal:
        raise WrongGoal(f"expected a {goal.value} profile, got {profile.goal.value}")
    if not profile.equal_widths:
        raise UnequalWidths("closed-form system metrics need equal-width measurement segments")


def hiding_product(rates, exponent: float) -> float:
    """prod(f_i ** exponent) evaluated as exp(exponent * sum(log f_i))."""
    if any(r <= 0.0 for r in rates):
        return 0.0
    return math.exp(exponent * math.fsum(math.log(r) for r in rates))


def appearing_complement(rates, exponent: float) -> float:
    """1 - prod((1 - f_i) ** exponent), via log1p/expm1."""
    if any(r >= 1.0 for r in rates):
        return 1.0
    return -math.expm1(exponent * math.fsum(math.log1p(-r) for r in rates))


def sys_ha(profile: SegmentProfile, scenario: DriveScenario) -> float:
    """Surrogate system-level hiding success: prod_i f_i ** (d / (n v t))."""
    _require(profile, AttackGoal.HIDING)
    _check_coverage(profile, scenario)
    return hiding_product(profile.rates, scenario.exponent(profile.n))


def sys_aa(profile: SegmentProfile, scenario: DriveScenario) -> float:
    """Surrogate system-level appearing success: 1 - prod_i (1 - f_i) ** (d / (n v t))."""
    _require(profile, AttackGoal.APPEARING)
    _check_coverage(profile, scenario)
    return appearing_complement(profile.rates, scenario.exponent(profile.n))


def sys_metric(profile: SegmentProfile, scenario: DriveScenario) -> float:
    """Dispatch on the profile's goal."""
    if profile.goal is AttackGoal.HIDING:
        return sys_ha(profile, scenario)
    return sys_aa(profile, scenario)


def sys_gap(profile_ha: SegmentProfile, profile_aa: SegmentProfile, scenario: DriveScenario) -> float:
    """SysAA - SysHA for a hiding and an appearing profile over the same segments."""
    a = [(s.near_m, s.far_m) for s in profile_ha.segments]
    b = [(s.near_m, s.far_m) for s in profile_aa.segments]
    if len(a) != len(b) or any(not (close(x[0], y[0]) and close(x[1], y[1])) for x, y in zip(a, b)):
        raise SegmentationMismatch("hiding and appearing profiles use different segmentations")
    return sys_aa(profile_aa, scenario) - sys_ha(profile_ha, scenario)
