import random

import pytest
from hypothesis import given, strategies as st

from sysmem.core import AttackGoal, DriveScenario, SweepGrid, uniform_profile
from sysmem.errors import BadStep, MissingFixture, ValidationError
from sysmem.metrics import sys_ha
from sysmem.sweep import (
    aggregate_over_grid,
    analysis_rows,
    max_gap,
    numerical_analysis_series,
    reproduce_paper_tables,
)

RP2_WB = [0.418, 0.10, 0.238, 0.654, 0.999, 1.0]
SIB_WB = [0.846, 0.566, 0.820, 0.992, 1.0, 1.0]


def point_at(series, x):
    return next(p for p in series.points if abs(p.x - x) < 1e-12)


def test_series_examples():
    p = point_at(numerical_analysis_series(5, 0.05), 0.5)
    assert p.sys_aa - p.f == pytest.approx(0.46875, abs=1e-12)
    for p in numerical_analysis_series(1, 0.1).points:
        assert p.sys_ha == pytest.approx(p.x) and p.sys_aa == pytest.approx(p.x)
    p = numerical_analysis_series(2, 0.1).points[0]
    assert (p.sys_ha, p.sys_aa) == (0.0, 0.0)


def test_series_spans_unit_interval():
    pts = numerical_analysis_series(3, 0.3).points
    assert pts[0].x == 0.0 and pts[-1].x == 1.0


@pytest.mark.parametrize("m, step", [(0, 0.1), (65, 0.1), (2.5, 0.1)])
def test_series_rejects_bad_m(m, step):
    with pytest.raises(ValidationError):
        numerical_analysis_series(m, step)


@pytest.mark.parametrize("step", [0, -0.1, 0.6])
def test_series_rejects_bad_step(step):
    with pytest.raises(BadStep):
        numerical_analysis_series(3, step)


@given(st.integers(1, 64), st.sampled_from([0.01, 0.05, 0.1, 0.25]))
def test_series_matches_closed_form(m, step):
    for p in numerical_analysis_series(m, step).points:
        assert abs(p.sys_ha - p.x**m) <= 1e-12
        assert abs(p.sys_aa - (1 - (1 - p.x) ** m)) <= 1e-12
        if m >= 2 and 0 < p.x < 1:
            assert p.sys_aa > p.x > p.sys_ha


def test_analysis_rows_are_plot_ready():
    rows = analysis_rows([2, 5], 0.5)
    assert [r["x"] for r in rows] == [0.0, 0.5, 1.0]
    assert rows[1]["sys_aa_m5"] == pytest.approx(0.96875)


@pytest.mark.parametrize("m", range(1, 12))
def test_max_gap_matches_analytic(m):
    x, gap = max_gap(m)
    assert gap == pytest.approx(1 - 2 * 0.5**m if m > 1 else 0.0, abs=1e-9)
    assert x == pytest.approx(0.5, abs=1e-6)


def test_single_point_grid_equals_metric():
    p = uniform_profile(RP2_WB)
    grid = SweepGrid((10.0,), (0.5,))
    report = aggregate_over_grid(p, grid, 30)
    assert report.aggregate == sys_ha(p, DriveScenario(30, 10, 0.5))
    assert report.diagnostics["grid_points"] == 1


def test_default_grid_desk_values():
    assert aggregate_over_grid(uniform_profile(RP2_WB), SweepGrid.default()).aggregate == pytest.approx(0.049, abs=5e-4)
    assert aggregate_over_grid(uniform_profile(SIB_WB), SweepGrid.default()).aggregate == pytest.approx(0.44, abs=5e-3)


def test_aggregate_permutation_invariant():
    p = uniform_profile(SIB_WB, goal=AttackGoal.APPEARING)
    g = SweepGrid.default()
    speeds, times = list(g.speeds_mps), list(g.times_s)
    rng = random.Random(4)
    rng.shuffle(speeds)
    rng.shuffle(times)
    shuffled = aggregate_over_grid(p, SweepGrid(tuple(speeds), tuple(times)))
    assert shuffled.aggregate == pytest.approx(aggregate_over_grid(p, g).aggregate, abs=1e-15)


def test_report_flags_fractional_m_and_csv_rows():
    r = aggregate_over_grid(uniform_profile(RP2_WB), SweepGrid.default())
    assert r.diagnostics["fractional_m_points"] > 0
    rows = r.csv_rows()
    assert len(rows) == 60 and rows[0]["metric"] == "sys_ha"
    assert r.to_dict()["metric"] == "sys_ha"


def test_reproduce_tables_all_checks_pass():
    report = reproduce_paper_tables()
    failed = [c for c in report.checks if not c["passed"]]
    assert not failed, failed
    assert report.recomputed("whitebox_hiding", "RP2", "model_level") == pytest.approx(0.568, abs=5e-4)
    deltas = [r for r in report.records if r["delta"] is not None]
    assert len(deltas) > 20


def test_reproduce_tables_missing_dir(tmp_path):
    with pytest.raises(MissingFixture):
        reproduce_paper_tables(tmp_path / "nope")
    with pytest.raises(MissingFixture):
        reproduce_paper_tables(tmp_path)
