"""Command-line entry point: ``sysmem <group> <command> [options]``.

Exit codes: 0 success, 2 parse error, 3 validation error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import sys
from pathlib import Path

from . import __version__
from .core import (
    AttackGoal,
    DEFAULT_FRAME_RATE_HZ,
    MemorizationPolicy,
    SignSemantics,
    SweepGrid,
    load_grid,
    load_profile,
    load_scenario,
    read_json_object,
    tolerant_ceil,
)
from .errors import ParseError, ScriptError, SysMemError, ValidationError
from .fixtures import fixtures_dir, sha256_file
from .memorization import (
    DEFAULT_TRIGGER_S,
    DEFAULT_VEHICLE_LENGTH_M,
    EXPERIMENT_DRIVE_SPEED_MPS,
    DriveTrace,
    SignInstance,
    reaction_requirement_met,
    reaction_task_outcome,
    simulate_display,
)
from .oracle import compare
from .stats import binomial_exact_test, proportion_z_test
from .sweep import aggregate_over_grid, analysis_rows, reproduce_paper_tables

EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def _manifest(args, inputs: list, seed=None) -> dict:
    checksums = {}
    for path in inputs:
        if path is not None and Path(path).is_file():
            checksums[str(path)] = sha256_file(path)
    return {
        "command": args.command_name,
        "inputs": checksums,
        "seed": seed,
        "tool_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def _csv_text(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    fields = list(rows[0].keys())
    for r in rows[1:]:
        for k in r:
            if k not in fields:
                fields.append(k)
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _emit(args, name: str, payload: dict, rows: list[dict] | None = None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(text)
        if rows is not None:
            (out / f"{name}.csv").write_text(_csv_text(rows))
    if args.format == "csv" and rows is not None:
        sys.stdout.write(_csv_text(rows))
    else:
        sys.stdout.write(text)


# --- commands ------------------------------------------------------------------


def cmd_metrics_compute(args) -> int:
    goal = AttackGoal.parse(args.goal)
    profile = load_profile(args.profile, goal=goal)
    if args.scenario:
        scenario = load_scenario(args.scenario, d_m=profile.coverage_m)
        grid = SweepGrid((scenario.v_mps,), (scenario.t_s,))
        d = scenario.d_m
    elif args.grid:
        grid, d = load_grid(args.grid)
    else:
        grid, d = SweepGrid.default(), None
    report = aggregate_over_grid(profile, grid, d)
    payload = {"manifest": _manifest(args, [args.profile, args.scenario, args.grid]), "report": report.to_dict()}
    _emit(args, "metrics", payload, report.csv_rows())
    return EXIT_OK


def cmd_metrics_sweep(args) -> int:
    rows = analysis_rows(args.m, args.x_step)
    payload = {"manifest": _manifest(args, []), "m": list(args.m), "x_step": args.x_step, "rows": rows}
    _emit(args, "sweep", payload, rows)
    return EXIT_OK


def cmd_oracle_compare(args) -> int:
    goal = AttackGoal.parse(args.goal)
    profile = load_profile(args.profile, goal=goal)
    scenario = load_scenario(args.scenario, d_m=profile.coverage_m)
    record = compare(profile, scenario, goal, args.trials, args.seed)
    payload = {"manifest": _manifest(args, [args.profile, args.scenario], seed=args.seed), "comparison": record}
    _emit(args, "oracle_compare", payload, [{k: v for k, v in record.items() if not isinstance(v, dict)}])
    return EXIT_OK


def _script_common(data: dict):
    try:
        sign_data = data["sign"]
        sign = SignInstance(SignSemantics.parse(sign_data["type"]), float(sign_data["position_m"]))
        policy = MemorizationPolicy.parse(data.get("policy", "spatial"))
    except (KeyError, TypeError) as exc:
        raise ScriptError(f"script needs sign.type, sign.position_m ({exc})") from None
    vehicle = data.get("vehicle", {})
    length = float(vehicle.get("length_m", DEFAULT_VEHICLE_LENGTH_M))
    rate = float(data.get("frame_rate_hz", DEFAULT_FRAME_RATE_HZ))
    if "trigger_frames" in data:
        trigger = int(data["trigger_frames"])
    else:
        trigger = max(1, tolerant_ceil(float(data.get("trigger_s", DEFAULT_TRIGGER_S)) * rate))
    return sign, policy, vehicle, length, rate, trigger


def _load_script(path) -> dict:
    try:
        return read_json_object(path)
    except ParseError as exc:
        raise ScriptError(str(exc)) from None


def cmd_sim_display(args) -> int:
    data = _load_script(args.script)
    sign, policy, vehicle, length, rate, trigger = _script_common(data)
    try:
        script = [(float(e["t_s"]), bool(e["visible"])) for e in data["script"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ScriptError(f"script entries need t_s and visible ({exc})") from None
    if not script:
        raise ScriptError("script has no visibility entries")
    drive_start = float(data.get("drive_start_s", max(t for t, _ in script)))
    run = simulate_display(
        script,
        drive_start,
        sign,
        policy,
        vehicle_start_m=float(data.get("vehicle_start_m", 0.0)),
        speed_mps=float(vehicle.get("speed_mps", EXPERIMENT_DRIVE_SPEED_MPS)),
        frame_rate_hz=rate,
        trigger_frames=trigger,
        vehicle_length_m=length,
    )
    result = {
        "memorized": run.memorized,
        "requirement_met": run.requirement_met,
        "sign": {"type": sign.semantics.value, "position_m": sign.position_m},
        "policy": policy.to_dict(),
        "trigger_frames": trigger,
        "timeline": list(run.timeline),
    }
    _emit(args, "sim_display", {"manifest": _manifest(args, [args.script]), "outcome": result}, list(run.timeline))
    return EXIT_OK


def cmd_sim_drive(args) -> int:
    data = _load_script(args.script)
    sign, policy, _vehicle, length, _rate, trigger = _script_common(data)
    try:
        rows = [(float(r["t_s"]), float(r["position_m"]), bool(r["detected"])) for r in data["trace"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ScriptError(f"trace rows need t_s, position_m, detected ({exc})") from None
    goal = AttackGoal.parse(data.get("goal", "hiding"))
    trace = DriveTrace.from_rows(rows)
    outcome = reaction_task_outcome(trace, sign, policy, goal, trigger_frames=trigger, vehicle_length_m=length)
    met = reaction_requirement_met(trace, sign, policy, trigger_frames=trigger, vehicle_length_m=length)
    result = {
        "goal": goal.value,
        "outcome": outcome.value,
        "requirement_met": met,
        "sign": {"type": sign.semantics.value, "position_m": sign.position_m},
        "policy": policy.to_dict(),
        "trigger_frames": trigger,
    }
    _emit(args, "sim_drive", {"manifest": _manifest(args, [args.script]), "outcome": result})
    return EXIT_OK


def cmd_stats(args) -> int:
    fn = binomial_exact_test if args.test == "binom" else proportion_z_test
    result = fn(args.successes, args.trials, args.null_p, args.alt)
    inputs = {"successes": args.successes, "trials": args.trials, "null_p": args.null_p}
    _emit(args, f"stats_{args.test}", {"manifest": _manifest(args, []), "inputs": inputs, "result": result.to_dict()})
    return EXIT_OK


def cmd_report_tables(args) -> int:
    grid = None
    if args.grid:
        grid, _ = load_grid(args.grid)
    directory = fixtures_dir(args.fixtures)
    report = reproduce_paper_tables(directory, grid)
    payload = {"manifest": _manifest(args, [args.grid]), "report": report.to_dict()}
    _emit(args, "tables", payload, report.records)
    for c in report.checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"[{status}] {c['name']} {c['detail']}".rstrip(), file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_RUNTIME


# --- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", help="also write <name>.json / <name>.csv here")
    common.add_argument("--format", choices=("json", "csv"), default="json", help="stdout format")

    parser = _Parser(prog="sysmem", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    groups = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    metrics = groups.add_parser("metrics", help="model- and system-level metrics").add_subparsers(
        dest="command", required=True, parser_class=_Parser
    )
    p = metrics.add_parser("compute", parents=[common], help="SysHA/SysAA at one scenario or over a grid")
    p.add_argument("--profile", required=True, help="CSV with near_m,far_m,rate")
    p.add_argument("--goal", default="hiding", choices=("hiding", "appearing"))
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scenario", help="JSON scenario (d_m, speed_mps|speed_mph, t_s)")
    src.add_argument("--grid", help="JSON grid (speeds_mph[], times_s[], optional d_m); default 25/30/35 mph x 0.05..1 s")
    p.set_defaults(func=cmd_metrics_compute)

    p = metrics.add_parser("sweep", parents=[common], help="flat-profile SysHA/SysAA series for plotting")
    p.add_argument("--m", type=int, nargs="+", default=[2, 3, 4, 5])
    p.add_argument("--x-step", type=float, default=0.01)
    p.set_defaults(func=cmd_metrics_sweep)

    oracle = groups.add_parser("oracle", help="independent checks").add_subparsers(
        dest="command", required=True, parser_class=_Parser
    )
    p = oracle.add_parser("compare", parents=[common], help="closed form vs exact vs enumeration vs Monte Carlo")
    p.add_argument("--profile", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--goal", default="hiding", choices=("hiding", "appearing"))
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle_compare)

    sim = groups.add_parser("sim", help="display state machine").add_subparsers(
        dest="command", required=True, parser_class=_Parser
    )
    p = sim.add_parser("display", parents=[common], help="stationary display / disappear / drive-past script")
    p.add_argument("--script", required=True)
    p.set_defaults(func=cmd_sim_display)
    p = sim.add_parser("drive", parents=[common], help="reaction-task outcome for a drive trace")
    p.add_argument("--script", required=True)
    p.set_defaults(func=cmd_sim_drive)

    stats = groups.add_parser("stats", help="significance tests").add_subparsers(
        dest="command", required=True, parser_class=_Parser
    )
    for name, help_text in (("binom", "exact binomial test"), ("z", "one-sample proportion z test")):
        p = stats.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--successes", type=int, required=True)
        p.add_argument("--trials", type=int, required=True)
        p.add_argument("--null-p", type=float, required=True)
        p.add_argument("--alt", default="two-sided", choices=("less", "greater", "two-sided"))
        p.set_defaults(func=cmd_stats, test=name)

    report = groups.add_parser("report", help="published table reproduction").add_subparsers(
        dest="command", required=True, parser_class=_Parser
    )
    p = report.add_parser("tables", parents=[common], help="recompute every bundled table")
    p.add_argument("--fixtures", help="fixture directory (default: $SYSMEM_FIXTURES or bundled)")
    p.add_argument("--grid")
    p.set_defaults(func=cmd_report_tables)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.command_name = f"{args.group} {args.command}"
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"sysmem: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"sysmem: validation error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SysMemError as exc:
        print(f"sysmem: error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
