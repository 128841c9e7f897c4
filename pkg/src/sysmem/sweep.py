"""Numerical analysis, speed x time aggregation and published-table reproduction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import (
    AttackGoal,
    DriveScenario,
    MemorizationPolicy,
    SegmentProfile,
    SignSemantics,
    SweepGrid,
    close,
)
from .errors import BadStep, ValidationError
from .fixtures import (
    FixtureTable,
    fixtures_dir,
    load_json_fixture,
    load_table,
    verify_fixtures,
)
from .memorization import run_display_experiment
from .metrics import model_level_rate, sys_metric

MAX_SERIES_M = 64
# Band used when comparing grid-aggregated SysHA with the published table values.
PUBLISHED_SYS_BAND = 0.05


# --- numerical analysis ---------------------------------------------------------


@dataclass(frozen=True)
class AnalysisPoint:
    x: float
    f: float
    sys_ha: float
    sys_aa: float


@dataclass(frozen=True)
class AnalysisSeries:
    """Equal per-segment rate x with n = m segments."""

    m: int
    points: tuple[AnalysisPoint, ...]


def gap_at(x: float, m: int) -> float:
    """SysAA - SysHA for a flat profile of rate x over m segments."""
    return 1.0 - (1.0 - x) ** m - x**m


def numerical_analysis_series(m: int, x_step: float) -> AnalysisSeries:
    if int(m) != m or not 1 <= m <= MAX_SERIES_M:
        raise ValidationError(f"m must be an integer in [1, {MAX_SERIES_M}], got {m!r}")
    if not (x_step > 0 and x_step <= 0.5):
        raise BadStep(f"x_step must lie in (0, 0.5], got {x_step!r}")
    m = int(m)
    count = int(math.floor(1.0 / x_step + 1e-9))
    xs = [min(1.0, round(k * x_step, 12)) for k in range(count + 1)]
    if xs[-1] < 1.0:
        xs.append(1.0)
    points = tuple(AnalysisPoint(x, x, x**m, 1.0 - (1.0 - x) ** m) for x in xs)
    return AnalysisSeries(m, points)


def analysis_rows(ms, x_step: float) -> list[dict]:
    """Plot-ready rows: one per x, with f and SysHA/SysAA columns per m."""
    series = [numerical_analysis_series(m, x_step) for m in ms]
    rows = []
    for i, base in enumerate(series[0].points):
        row = {"x": base.x, "f": base.f}
        for s in series:
            p = s.points[i]
            row[f"sys_ha_m{s.m}"] = p.sys_ha
            row[f"sys_aa_m{s.m}"] = p.sys_aa
        rows.append(row)
    return rows


def max_gap(m: int, *, tol: float = 1e-12) -> tuple[float, float]:
    """Maximize SysAA - SysHA over x in [0, 1] by successive grid refinement.

    The known answer is x = 0.5 with gap 1 - 2 * 0.5**m; this searches
    instead of assuming it.  For m = 1 the gap is identically zero and
    x = 0.5 is reported by convention.
    """
    if int(m) != m or m < 1:
        raise ValidationError(f"m must be a positive integer, got {m!r}")
    m = int(m)
    if m == 1:
        return 0.5, 0.0
    lo, hi = 0.0, 1.0
    best_x, best = 0.0, -math.inf
    while hi - lo > tol:
        n = 1000
        h = (hi - lo) / n
        for k in range(n + 1):
            x = lo + k * h
            g = gap_at(x, m)
            if g > best:
                best, best_x = g, x
        lo, hi = max(0.0, best_x - 2 * h), min(1.0, best_x + 2 * h)
    return best_x, best


# --- grid aggregation -------------------------------------------------------------


@dataclass(frozen=True)
class GridPoint:
    speed_mps: float
    t_s: float
    m: float
    exponent: float
    value: float

    def to_dict(self) -> dict:
        return {
            "speed_mps": self.speed_mps,
            "t_s": self.t_s,
            "m": self.m,
            "exponent": self.exponent,
            "value": self.value,
        }


@dataclass(frozen=True)
class MetricReport:
    goal: AttackGoal
    d_m: float
    model_level: float
    points: tuple[GridPoint, ...]
    aggregate: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def metric_name(self) -> str:
        return "sys_ha" if self.goal is AttackGoal.HIDING else "sys_aa"

    def to_dict(self) -> dict:
        return {
            "goal": self.goal.value,
            "metric": self.metric_name,
            "d_m": self.d_m,
            "model_level": self.model_level,
            "aggregate": self.aggregate,
            "points": [p.to_dict() for p in self.points],
            "diagnostics": dict(self.diagnostics),
        }

    def csv_rows(self) -> list[dict]:
        return [{"metric": self.metric_name, **p.to_dict()} for p in self.points]


def aggregate_over_grid(profile: SegmentProfile, grid: SweepGrid, d: float | None = None) -> MetricReport:
    """Evaluate SysHA or SysAA (by ``profile.goal``) at every (v, t) and average uniformly."""
    d = profile.coverage_m if d is None else float(d)
    points = []
    fractional = 0
    for v, t in grid.points():
        scenario = DriveScenario(d, v, t)
        value = sys_metric(profile, scenario)
        m = scenario.m
        if not close(m, round(m)):
            fractional += 1
        points.append(GridPoint(v, t, m, scenario.exponent(profile.n), value))
    aggregate = math.fsum(p.value for p in points) / len(points)
    diagnostics = {
        "grid_points": len(points),
        "fractional_m_points": fractional,
        "unequal_widths": not profile.equal_widths,
    }
    return MetricReport(profile.goal, d, model_level_rate(profile), tuple(points), aggregate, diagnostics)


# --- published table reproduction -------------------------------------------------


@dataclass
class ReportSet:
    records: list[dict] = field(default_factory=list)
    checks: list[dict] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def recomputed(self, table: str, label: str, quantity: str) -> float:
        for r in self.records:
            if (r["table"], r["label"], r["quantity"]) == (table, label, quantity):
                return r["recomputed"]
        raise KeyError((table, label, quantity))

    def check(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append({"name": name, "passed": bool(passed), "detail": detail})

    def to_dict(self) -> dict:
        return {"ok": self.ok, "records": self.records, "checks": self.checks, "notes": self.notes}


def _table_records(table: FixtureTable, grid: SweepGrid, out: ReportSet) -> dict[str, dict]:
    values = {}
    for row in table.rows:
        report = aggregate_over_grid(row.profile, grid, table.d_m)
        sys_name = report.metric_name
        got = {"model_level": report.model_level, sys_name: report.aggregate}
        values[row.label] = got
        for quantity, recomputed in got.items():
            paper_key = "model_level" if quantity == "model_level" else "sys"
            paper = row.paper.get(paper_key)
            out.records.append(
                {
                    "table": table.name,
                    "label": row.label,
                    "quantity": quantity,
                    "paper_value": paper,
                    "recomputed": recomputed,
                    "delta": None if paper is None else recomputed - paper,
                    **({"flat_surrogate": True} if row.meta.get("flat_surrogate") else {}),
                }
            )
    if table.note:
        out.notes[table.name] = table.note
    return values


def reproduce_paper_tables(fixtures_path=None, grid: SweepGrid | None = None) -> ReportSet:
    """Recompute every bundled table and check the orderings drawn between them.

    Records pair each published value with its recomputation and the delta.
    Checks cover the orderings and gains the published text claims; only the
    white-box SysHA band is a numeric tolerance.
    """
    directory = fixtures_dir(fixtures_path)
    verify_fixtures(directory)
    grid = grid or SweepGrid.default()
    out = ReportSet()

    wb = _table_records(load_table("whitebox_hiding", directory), grid, out)
    for label, published in (("RP2", 0.066), ("SIB", 0.451), ("FTE", 0.052)):
        got = wb[label]["sys_ha"]
        out.check(
            f"whitebox {label} SysHA within {PUBLISHED_SYS_BAND} of published",
            abs(got - published) <= PUBLISHED_SYS_BAND,
            f"recomputed {got:.4f}, published {published}",
        )
    for label, v in wb.items():
        out.check(f"whitebox {label} SysHA < f_HA", v["sys_ha"] < v["model_level"])
    rp2, sib, fte = (wb[k]["sys_ha"] for k in ("RP2", "SIB", "FTE"))
    out.check("whitebox SIB SysHA >> RP2, FTE", sib > 5 * max(rp2, fte), f"SIB {sib:.4f} RP2 {rp2:.4f} FTE {fte:.4f}")
    out.check("whitebox RP2 ~ FTE SysHA", abs(rp2 - fte) <= PUBLISHED_SYS_BAND, f"|RP2 - FTE| = {abs(rp2 - fte):.4f}")

    tr = _table_records(load_table("transfer_hiding", directory), grid, out)
    for label, v in tr.items():
        out.check(f"transfer {label} SysHA < f_HA", v["sys_ha"] < v["model_level"])

    sib_table = load_table("sib_hiding_vs_appearing", directory)
    sv = _table_records(sib_table, grid, out)
    for setting in ("whitebox", "transfer"):
        ha, aa = sv[f"{setting}_HA"], sv[f"{setting}_AA"]
        out.check(f"SIB {setting}: SysHA < f_HA", ha["sys_ha"] < ha["model_level"])
        out.check(f"SIB {setting}: SysAA > f_AA", aa["sys_aa"] > aa["model_level"])
        out.check(
            f"SIB {setting}: model-level favors hiding, system-level favors appearing",
            ha["model_level"] > aa["model_level"] and aa["sys_aa"] > ha["sys_ha"],
        )

    nae = _table_records(load_table("nested_ae", directory), grid, out)
    f_gain = nae["with_NAE"]["model_level"] - nae["without_NAE"]["model_level"]
    s_gain = nae["with_NAE"]["sys_aa"] - nae["without_NAE"]["sys_aa"]
    out.check("NAE: f_AA improvement >= 0.10", f_gain >= 0.10, f"{f_gain:.4f}")
    out.check("NAE: SysAA improvement <= 0.02", s_gain <= 0.02, f"{s_gain:.4f}")
    without, with_ = (load_table("nested_ae", directory).row(k).profile.rates for k in ("without_NAE", "with_NAE"))
    out.check("NAE: f_AA no worse in every segment", all(b >= a for a, b in zip(without, with_)))

    mem = memorization_table(directory)
    out.records.extend(mem)
    out.check(
        "memorization table reproduced",
        all(r["recomputed"] == r["paper_value"] for r in mem),
        f"{sum(r['recomputed'] == r['paper_value'] for r in mem)}/{len(mem)} cells",
    )
    out.notes["grid"] = {"points": len(grid), "speeds_mps": list(grid.speeds_mps), "times_s": list(grid.times_s)}
    return out


def memorization_table(directory=None) -> list[dict]:
    """Replay every populated memorization-rate cell; each cell's three runs are deterministic."""
    doc = load_json_fixture("memorization_rates.json", fixtures_dir(directory))
    policies = doc["vehicle_policies"]
    records = []
    for cell in doc["cells"]:
        policy = MemorizationPolicy.parse(policies[cell["vehicle"]])
        memorized = run_display_experiment(
            cell["display_s"], cell["disappear_s"], policy, SignSemantics.parse(cell["sign"])
        )
        runs = cell["runs"]
        records.append(
            {
                "table": "memorization_rates",
                "label": f"{cell['vehicle']}/{cell['sign']}/{cell['display_s']}s/{cell['disappear_s']}s",
                "quantity": "memorized_runs",
                "paper_value": cell["memorized"],
                "recomputed": runs if memorized else 0,
                "delta": (runs if memorized else 0) - cell["memorized"],
            }
        )
    return records
