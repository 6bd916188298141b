"""CSV / GeoJSON ingestion and serialization.

Loaders are pure with respect to their inputs and never coerce out-of-range
values; every rejection names the offending row and field.  ``write_*``
functions emit the canonical column order so that parse followed by
serialize is the identity on valid files.
"""

from __future__ import annotations

import csv
import datetime as dt
import io as _io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, TextIO

from .errors import (
    BadDate,
    BaselineWaveError,
    DuplicateKey,
    KindMismatch,
    MissingColumn,
    NegativeAge,
    RangeViolation,
    UnknownVariable,
)
from .model import (
    CensusProfile,
    CensusVariable,
    EdiRecord,
    NeighborhoodId,
    RegistrationRecord,
    SEASONS,
)

EDI_COLUMNS = [
    "neighborhood_id", "neighborhood_name", "wave", "n_children",
    "physical", "social", "emotional", "language_cognitive", "communication",
    "one_or_more", "two_or_more",
]

REGISTRATION_COLUMNS = [
    "client_id", "birth_date", "gender", "neighborhood_id", "account_created",
    "registration_id", "course_id", "course_title", "course_subtitle",
    "season", "registration_date", "completed", "max_registrants", "subsidized",
]

CATALOG_COLUMNS = ["var_id", "label", "category", "kind"]

_GENDER_ALIASES = {
    "male": "male", "m": "male",
    "female": "female", "f": "female",
}

_SEASON_ALIASES = {s.lower(): s for s in SEASONS}


def _open(path_or_file) -> TextIO:
    if hasattr(path_or_file, "read"):
        return path_or_file
    return open(path_or_file, "r", encoding="utf-8", newline="")


def _require_columns(fieldnames, required, path=None):
    missing = [c for c in required if c not in (fieldnames or [])]
    if missing:
        raise MissingColumn(missing, path)


def _parse_float(raw: str, field: str, row: int) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise RangeViolation(field, f"cannot parse number {raw!r}", row) from None


def _parse_int(raw: str, field: str, row: int) -> int:
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise RangeViolation(field, f"cannot parse integer {raw!r}", row) from None


def _parse_date(raw: str, field: str, row: int) -> dt.date:
    try:
        return dt.date.fromisoformat((raw or "").strip())
    except ValueError:
        raise BadDate(field, raw, row) from None


def _parse_bool(raw: str, field: str, row: int) -> bool:
    value = (raw or "").strip().lower()
    if value in ("true", "1", "yes", "y"):
        return True
    if value in ("false", "0", "no", "n"):
        return False
    raise RangeViolation(field, f"cannot parse boolean {raw!r}", row)


# --- EDI ---------------------------------------------------------------------

def load_edi(path) -> list[EdiRecord]:
    """Parse the EDI CSV, range-validating and rejecting duplicate keys."""
    records: list[EdiRecord] = []
    seen: set[tuple[str, int]] = set()
    with _open(path) as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, EDI_COLUMNS, getattr(path, "name", path))
        for i, row in enumerate(reader, start=2):
            try:
                rec = EdiRecord(
                    neighborhood=NeighborhoodId(row["neighborhood_id"].strip(),
                                                row["neighborhood_name"].strip()),
                    wave=_parse_int(row["wave"], "wave", i),
                    n_children=_parse_int(row["n_children"], "n_children", i),
                    physical=_parse_float(row["physical"], "physical", i),
                    social=_parse_float(row["social"], "social", i),
                    emotional=_parse_float(row["emotional"], "emotional", i),
                    language_cognitive=_parse_float(row["language_cognitive"], "language_cognitive", i),
                    communication=_parse_float(row["communication"], "communication", i),
                    one_or_more=_parse_float(row["one_or_more"], "one_or_more", i),
                    two_or_more=_parse_float(row["two_or_more"], "two_or_more", i),
                )
            except BaselineWaveError as err:
                if err.row is None:
                    raise BaselineWaveError(i) from None
                raise
            except RangeViolation as err:
                if err.row is None:
                    raise RangeViolation(err.field, err.message, i) from None
                raise
            key = (rec.neighborhood.id, rec.wave)
            if key in seen:
                raise DuplicateKey(rec.neighborhood.id, rec.wave, i)
            seen.add(key)
            records.append(rec)
    return records


def write_edi(records: Iterable[EdiRecord], path) -> None:
    with _writer(path) as (fh, writer):
        writer.writerow(EDI_COLUMNS)
        for r in records:
            writer.writerow([
                r.neighborhood.id, r.neighborhood.name, r.wave, r.n_children,
                _num(r.physical), _num(r.social), _num(r.emotional),
                _num(r.language_cognitive), _num(r.communication),
                _num(r.one_or_more), _num(r.two_or_more),
            ])


# --- census --------------------------------------------------------------------

@dataclass(frozen=True)
class DaTable:
    """Raw per-DA census values; missing cells are absent from the row dict."""

    var_ids: tuple[str, ...]
    rows: dict[str, dict[str, float]]

    def da_ids(self) -> list[str]:
        return sorted(self.rows)


def load_catalog(path) -> list[CensusVariable]:
    variables: list[CensusVariable] = []
    seen: set[str] = set()
    with _open(path) as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, CATALOG_COLUMNS, getattr(path, "name", path))
        has_links = "numerator" in (reader.fieldnames or [])
        for i, row in enumerate(reader, start=2):
            var = CensusVariable(
                var_id=row["var_id"].strip(),
                label=row["label"].strip(),
                category=row["category"].strip(),
                kind=row["kind"].strip(),
                numerator=(row.get("numerator") or "").strip() or None if has_links else None,
                denominator=(row.get("denominator") or "").strip() or None if has_links else None,
            )
            if var.var_id in seen:
                raise DuplicateKey(var.var_id, 0, i)
            seen.add(var.var_id)
            variables.append(var)
    return variables


def load_census(path, catalog_path) -> tuple[list[CensusVariable], DaTable]:
    """Load the DA-level census table against its variable catalog.

    Every data column must match a catalog entry; empty cells are missing
    values, distinct from zero.
    """
    catalog = load_catalog(catalog_path)
    by_id = {v.var_id: v for v in catalog}
    rows: dict[str, dict[str, float]] = {}
    with _open(path) as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if "da_id" not in fields:
            raise MissingColumn(["da_id"], getattr(path, "name", path))
        var_ids = [c for c in fields if c != "da_id"]
        for col in var_ids:
            if col not in by_id:
                raise UnknownVariable(col)
        for i, row in enumerate(reader, start=2):
            da_id = row["da_id"].strip()
            values: dict[str, float] = {}
            for col in var_ids:
                cell = (row.get(col) or "").strip()
                if cell == "":
                    continue
                try:
                    values[col] = float(cell)
                except ValueError:
                    raise KindMismatch(col, cell, i) from None
            rows[da_id] = values
    return catalog, DaTable(var_ids=tuple(var_ids), rows=rows)


def write_catalog(variables: Iterable[CensusVariable], path) -> None:
    with _writer(path) as (fh, writer):
        writer.writerow(CATALOG_COLUMNS)
        for v in variables:
            writer.writerow([v.var_id, v.label, v.category, v.kind])


def write_profiles(profiles, var_ids: list[str], path) -> None:
    """Neighborhood-level census table (one row per neighborhood)."""
    with _writer(path) as (fh, writer):
        writer.writerow(["neighborhood_id"] + list(var_ids))
        for p in sorted(profiles, key=lambda p: p.neighborhood):
            writer.writerow([p.neighborhood] + [
                "" if p.get(v) is None else _num(p.get(v)) for v in var_ids
            ])


def load_profiles(path, catalog: list[CensusVariable]) -> list[CensusProfile]:
    """Read an already-aggregated neighborhood-level census table."""
    by_id = {v.var_id: v for v in catalog}
    profiles: list[CensusProfile] = []
    with _open(path) as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if "neighborhood_id" not in fields:
            raise MissingColumn(["neighborhood_id"], getattr(path, "name", path))
        for col in fields:
            if col != "neighborhood_id" and col not in by_id:
                raise UnknownVariable(col)
        for i, row in enumerate(reader, start=2):
            values = {}
            for col in fields:
                if col == "neighborhood_id":
                    continue
                cell = (row.get(col) or "").strip()
                if cell == "":
                    continue
                try:
                    values[col] = float(cell)
                except ValueError:
                    raise KindMismatch(col, cell, i) from None
            profiles.append(CensusProfile(row["neighborhood_id"].strip(), values))
    return profiles


# --- registrations ---------------------------------------------------------------

def load_registrations(path) -> list[RegistrationRecord]:
    """Parse the registration CSV; dates ISO-8601, gender normalized."""
    records: list[RegistrationRecord] = []
    with _open(path) as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, REGISTRATION_COLUMNS, getattr(path, "name", path))
        for i, row in enumerate(reader, start=2):
            birth = _parse_date(row["birth_date"], "birth_date", i)
            registered = _parse_date(row["registration_date"], "registration_date", i)
            if registered < birth:
                raise NegativeAge(row["client_id"], i)
            season = _SEASON_ALIASES.get((row["season"] or "").strip().lower())
            if season is None:
                raise RangeViolation("season", f"unknown season {row['season']!r}", i)
            neighborhood = row["neighborhood_id"].strip() or None
            records.append(RegistrationRecord(
                client_id=row["client_id"].strip(),
                birth_date=birth,
                gender=_GENDER_ALIASES.get((row["gender"] or "").strip().lower(), "unspecified"),
                neighborhood=neighborhood,
                account_created=_parse_date(row["account_created"], "account_created", i),
                registration_id=row["registration_id"].strip(),
                course_id=row["course_id"].strip(),
                course_title=row["course_title"].strip(),
                course_subtitle=row["course_subtitle"].strip(),
                season=season,
                registration_date=registered,
                completed=_parse_bool(row["completed"], "completed", i),
                max_registrants=_parse_int(row["max_registrants"], "max_registrants", i),
                subsidized=_parse_bool(row["subsidized"], "subsidized", i),
            ))
    return records


def write_registrations(records: Iterable[RegistrationRecord], path) -> None:
    with _writer(path) as (fh, writer):
        writer.writerow(REGISTRATION_COLUMNS)
        for r in records:
            writer.writerow([
                r.client_id, r.birth_date.isoformat(), r.gender,
                r.neighborhood or "", r.account_created.isoformat(),
                r.registration_id, r.course_id, r.course_title, r.course_subtitle,
                r.season, r.registration_date.isoformat(),
                "true" if r.completed else "false",
                r.max_registrants,
                "true" if r.subsidized else "false",
            ])


# --- GeoJSON -----------------------------------------------------------------------

def load_geojson(path) -> dict:
    if hasattr(path, "read"):
        return json.load(path)
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# --- helpers -----------------------------------------------------------------------

class _writer:
    """Context manager yielding (file, csv.writer) with canonical settings."""

    def __init__(self, path):
        self.path = path
        self._own = not hasattr(path, "write")

    def __enter__(self):
        self.fh = open(self.path, "w", encoding="utf-8", newline="") if self._own else self.path
        return self.fh, csv.writer(self.fh, lineterminator="\n")

    def __exit__(self, *exc):
        if self._own:
            self.fh.close()
        return False


def _num(x) -> str:
    """Canonical, deterministic decimal formatting for CSV cells."""
    value = float(x)
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def dumps_edi(records: Iterable[EdiRecord]) -> str:
    buf = _io.StringIO()
    write_edi(records, buf)
    return buf.getvalue()
