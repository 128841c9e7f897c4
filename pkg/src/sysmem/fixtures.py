"""Bundled published-table datasets and their checksum manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .core import AttackGoal, SegmentProfile, validate_profile
from .errors import ChecksumMismatch, MissingFixture, ParseError

ENV_VAR = "SYSMEM_FIXTURES"
CHECKSUM_FILE = "checksums.json"
PROFILE_TABLES = ("whitebox_hiding", "transfer_hiding", "sib_hiding_vs_appearing", "nested_ae")
JSON_FIXTURES = ("memorization_rates.json", "commercial_testing.json")


def bundled_dir() -> Path:
    return Path(__file__).resolve().parent / "data"


def fixtures_dir(override=None) -> Path:
    if override is not None:
        return Path(override)
    env = os.environ.get(ENV_VAR)
    return Path(env) if env else bundled_dir()


def fixture_files() -> list[str]:
    names = []
    for table in PROFILE_TABLES:
        names += [f"{table}.csv", f"{table}.json"]
    return names + list(JSON_FIXTURES)


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_checksums(directory) -> dict:
    """Regenerate the manifest after deliberately editing a fixture."""
    directory = Path(directory)
    sums = {name: sha256_file(directory / name) for name in fixture_files()}
    (directory / CHECKSUM_FILE).write_text(json.dumps(sums, indent=1, sort_keys=True) + "\n")
    return sums


def verify_fixtures(directory) -> dict:
    directory = Path(directory)
    if not directory.is_dir():
        raise MissingFixture(f"fixture directory {directory} does not exist")
    manifest = directory / CHECKSUM_FILE
    if not manifest.is_file():
        raise MissingFixture(f"no {CHECKSUM_FILE} in {directory}")
    sums = json.loads(manifest.read_text())
    for name in fixture_files():
        path = directory / name
        if not path.is_file():
            raise MissingFixture(f"missing fixture {path}")
        expected = sums.get(name)
        if expected is None:
            raise ChecksumMismatch(f"{name} has no recorded checksum")
        actual = sha256_file(path)
        if actual != expected:
            raise ChecksumMismatch(f"{name}: checksum {actual[:12]}... does not match recorded {expected[:12]}...")
    return sums


@dataclass(frozen=True)
class TableRow:
    label: str
    profile: SegmentProfile
    paper: dict
    meta: dict


@dataclass(frozen=True)
class FixtureTable:
    name: str
    title: str
    d_m: float
    rows: tuple[TableRow, ...]
    note: str | None = None

    def row(self, label: str) -> TableRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)


def _read_labelled_csv(path: Path) -> dict[str, list[tuple[float, float, float]]]:
    text = path.read_text()
    reader = csv.reader(io.StringIO(text))
    header = [h.strip() for h in next(reader, [])]
    if header != ["label", "near_m", "far_m", "rate"]:
        raise ParseError("expected header label,near_m,far_m,rate", line=1, source=str(path))
    out: dict[str, list] = {}
    for row in reader:
        if not row:
            continue
        if len(row) != 4:
            raise ParseError(f"expected 4 fields, got {len(row)}", line=reader.line_num, source=str(path))
        try:
            seg = tuple(float(x) for x in row[1:])
        except ValueError:
            raise ParseError(f"non-numeric field in {row!r}", line=reader.line_num, source=str(path)) from None
        out.setdefault(row[0].strip(), []).append(seg)
    return out


def load_table(name: str, directory=None) -> FixtureTable:
    directory = fixtures_dir(directory)
    csv_path = directory / f"{name}.csv"
    side_path = directory / f"{name}.json"
    if not csv_path.is_file() or not side_path.is_file():
        raise MissingFixture(f"fixture table {name!r} not found in {directory}")
    segments = _read_labelled_csv(csv_path)
    side = json.loads(side_path.read_text())
    rows = []
    for label, info in side["labels"].items():
        if label not in segments:
            raise MissingFixture(f"{name}: label {label!r} has no rows in {csv_path.name}")
        meta = {k: v for k, v in info.items() if k not in ("goal", "paper")}
        profile = validate_profile(segments[label], goal=AttackGoal.parse(info["goal"]))
        rows.append(TableRow(label, profile, dict(info["paper"]), meta))
    return FixtureTable(name, side.get("title", name), float(side["d_m"]), tuple(rows), side.get("note"))


def load_json_fixture(filename: str, directory=None) -> dict:
    path = fixtures_dir(directory) / filename
    if not path.is_file():
        raise MissingFixture(f"missing fixture {path}")
    return json.loads(path.read_text())


def scripts_dir(directory=None) -> Path:
    return fixtures_dir(directory) / "scripts"
