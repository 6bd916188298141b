"""Seeded synthetic fixtures shaped like the real survey and registration data.

The live registration store is private, so tests, demos, and the service
all run on generators that reproduce its structure: blob-separated EDI
vectors, a DA/neighborhood map, a census table with cluster-separated
variables, and registration records whose exit ages peak at 7-9.
"""

from __future__ import annotations

import datetime as dt
import json
from pathlib import Path

import numpy as np

from . import io as vio
from .geo import GeometrySet, Polygon, geojson_from_geometry_set
from .model import (
    CensusVariable,
    Dataset,
    EdiRecord,
    NeighborhoodId,
    RegistrationRecord,
    dataset_from_edi,
)
from .retention import DEFAULT_RULES, GROUP_NAMES

BLOB_CENTERS = np.array([
    [8.0, 9.0, 7.0, 6.0, 8.0],       # low vulnerability
    [16.0, 17.0, 15.0, 14.0, 16.0],  # mid
    [26.0, 28.0, 25.0, 23.0, 27.0],  # high
])

_TITLES = {
    "Aquatics": [("Swim Lessons Level %d", "Pool basics"), ("Aquatic Leaders", "Water safety")],
    "Day Camps": [("Spring Break Camp %d", "Full day"), ("Adventure Camp %d", "Ages 6-10")],
    "Parent Participation": [("Parent & Tot Play %d", "Drop in"), ("Family Gym Time", "All ages")],
    "Music/Dance/Theatre": [("Ballet Basics %d", "Intro"), ("Drama Club", "Stagecraft")],
    "Sports & Fitness": [("Soccer Skills %d", "Indoor"), ("Learn to Skate %d", "Beginner")],
    "Arts & Cooking": [("Pottery for Kids %d", "Handbuilding"), ("Junior Baking", "Sweet treats")],
    "Outdoor Education": [("Nature Explorers %d", "Forest walks"), ("Outdoor Survival", "Basics")],
    "General Activities": [("After School Club %d", "Homework help"), ("Computer Literacy", "Keyboarding")],
}

def _season_of(date: dt.date) -> str:
    return {12: "Winter", 1: "Winter", 2: "Winter",
            3: "Spring", 4: "Spring", 5: "Spring",
            6: "Summer", 7: "Summer", 8: "Summer",
            9: "Fall", 10: "Fall", 11: "Fall"}[date.month]


def neighborhood_ids(n: int = 24) -> list[NeighborhoodId]:
    return [NeighborhoodId(f"N{i:02d}", f"Neighborhood {i:02d}") for i in range(1, n + 1)]


def blob_assignments(n: int = 24, n_blobs: int = 3) -> dict[str, int]:
    """Deterministic balanced assignment of neighborhoods to blobs."""
    ids = neighborhood_ids(n)
    return {nbhd.id: i % n_blobs for i, nbhd in enumerate(ids)}


def synthetic_edi(seed: int, n_neighborhoods: int = 24,
                  waves: tuple[int, ...] = (2, 3, 4, 5, 6),
                  spread: float = 2.0) -> tuple[list[EdiRecord], dict[str, int]]:
    """Blob-structured EDI records; returns (records, true blob labels).

    Within-blob noise is uniform with half-width ``spread`` so clusters are
    spatially random inside (no dense Gaussian core); small spreads give
    cleanly separable blobs, large ones the diffuse regime of real survey
    data.
    """
    rng = np.random.default_rng(seed)
    ids = neighborhood_ids(n_neighborhoods)
    truth = blob_assignments(n_neighborhoods, len(BLOB_CENTERS))
    records: list[EdiRecord] = []
    for nbhd in ids:
        blob = truth[nbhd.id]
        base_children = int(rng.integers(150, 900))
        for wave in waves:
            scales = np.clip(BLOB_CENTERS[blob] + rng.uniform(-spread, spread, 5), 0.5, 99.0)
            one_or_more = float(np.clip(scales.mean() * 1.8 + rng.normal(0.0, 1.0), 1.0, 99.0))
            two_or_more = float(np.clip(one_or_more * 0.55 + rng.normal(0.0, 0.8),
                                        0.0, one_or_more))
            records.append(EdiRecord(
                neighborhood=nbhd,
                wave=wave,
                n_children=max(0, base_children + int(rng.integers(-30, 30))),
                physical=float(scales[0]),
                social=float(scales[1]),
                emotional=float(scales[2]),
                language_cognitive=float(scales[3]),
                communication=float(scales[4]),
                one_or_more=one_or_more,
                two_or_more=two_or_more,
            ))
    return records, truth


def synthetic_dataset(seed: int, n_neighborhoods: int = 24,
                      spread: float = 2.0) -> tuple[Dataset, dict[str, int]]:
    records, truth = synthetic_edi(seed, n_neighborhoods, spread=spread)
    return dataset_from_edi(records), truth


# --- geometry ---------------------------------------------------------------------

def _square(cx: float, cy: float, half: float) -> Polygon:
    return Polygon(exterior=(
        (cx - half, cy - half), (cx + half, cy - half),
        (cx + half, cy + half), (cx - half, cy + half),
        (cx - half, cy - half),
    ))


def synthetic_geometry(seed: int, n_da: int = 200,
                       n_neighborhoods: int = 24) -> tuple[GeometrySet, GeometrySet]:
    """A 6x4 grid of unit-square neighborhoods (one with a hole) plus
    small-square DAs scattered over and slightly beyond the grid."""
    ids = neighborhood_ids(n_neighborhoods)
    entries: dict[str, tuple[Polygon, ...]] = {}
    for i, nbhd in enumerate(ids):
        col, row = i % 6, i // 6
        if i == 7:   # carve a hole to exercise even-odd containment
            outer = _square(col + 0.5, row + 0.5, 0.5)
            hole = _square(col + 0.5, row + 0.5, 0.15)
            entries[nbhd.id] = (Polygon(exterior=outer.exterior, holes=(hole.exterior,)),)
        else:
            entries[nbhd.id] = (_square(col + 0.5, row + 0.5, 0.5),)
    nbhd_geo = GeometrySet(entries=entries)

    rng = np.random.default_rng(seed)
    da_entries: dict[str, tuple[Polygon, ...]] = {}
    for i in range(n_da):
        cx = float(rng.uniform(-0.3, 6.3))
        cy = float(rng.uniform(-0.3, 4.3))
        da_entries[f"DA{i:04d}"] = (_square(cx, cy, 0.04),)
    return GeometrySet(entries=da_entries), nbhd_geo


# --- census -----------------------------------------------------------------------

def synthetic_census(seed: int, assignments: dict[str, str | None],
                     truth: dict[str, int],
                     catalog: list[CensusVariable]) -> vio.DaTable:
    """Per-DA census values with a handful of blob-separated variables.

    Income medians fall and unemployment/renter/transit figures rise with
    blob vulnerability; everything else is undifferentiated noise.
    """
    rng = np.random.default_rng(seed)
    separated = {
        "household_income_median": (90000.0, -18000.0, 6000.0),
        "income_among_recipients_median": (42000.0, -7000.0, 2500.0),
        "unemployment_rate": (5.0, 1.8, 0.4),
        "renters": (400.0, 180.0, 60.0),
        "transit_users": (300.0, 120.0, 45.0),
        "lone_parent_pct": (12.0, 4.0, 1.2),
    }
    rows: dict[str, dict[str, float]] = {}
    for da_id in sorted(assignments):
        nbhd = assignments[da_id]
        blob = truth.get(nbhd, 1) if nbhd is not None else 1
        values: dict[str, float] = {}
        for var in catalog:
            if var.var_id in separated:
                base, slope, noise = separated[var.var_id]
                values[var.var_id] = float(max(0.0, base + slope * blob + rng.normal(0.0, noise)))
            elif var.var_id == "population":
                values[var.var_id] = float(rng.integers(400, 900))
            elif var.kind == "count":
                values[var.var_id] = float(rng.integers(50, 500))
            elif var.kind == "percent":
                values[var.var_id] = float(rng.uniform(2.0, 60.0))
            elif var.kind in ("median", "mean"):
                values[var.var_id] = float(rng.normal(1000.0, 150.0))
            elif var.kind == "rate":
                values[var.var_id] = float(rng.uniform(3.0, 70.0))
            else:   # ratio
                values[var.var_id] = float(rng.uniform(0.5, 1.5))
        # sprinkle missing cells on one benign variable
        if rng.random() < 0.05:
            values.pop("other_origins_pct", None)
        rows[da_id] = values
    return vio.DaTable(var_ids=tuple(v.var_id for v in catalog), rows=rows)


# --- registrations -------------------------------------------------------------------

def synthetic_registrations(seed: int, n_records: int = 500,
                            n_neighborhoods: int = 24) -> list[RegistrationRecord]:
    """Registration records whose exit ages peak in the 7-9 band.

    Includes a scattering of rows that trip each retrieval filter
    (pre-2000 births/accounts, single-registrant courses, withdrawals) so
    rejection reporting always has material to show.
    """
    rng = np.random.default_rng(seed)
    ids = [n.id for n in neighborhood_ids(n_neighborhoods)]
    records: list[RegistrationRecord] = []
    client = 0
    while len(records) < n_records:
        client += 1
        client_id = f"C{client:05d}"
        gender = ("male", "female", "unspecified")[int(rng.choice([0, 1, 2], p=[0.48, 0.48, 0.04]))]
        neighborhood = None if rng.random() < 0.08 else str(rng.choice(ids))
        birth = dt.date(2000, 1, 2) + dt.timedelta(days=int(rng.integers(0, 9 * 365)))
        entry_age = int(np.clip(rng.geometric(0.35), 1, 8))
        exit_age = int(np.clip(round(rng.normal(8.0, 1.2)), entry_age, 13))
        account = birth + dt.timedelta(days=int(rng.integers(200, 1200)))

        n_regs = int(rng.integers(1, 5))
        ages = np.linspace(entry_age, exit_age, n_regs) if n_regs > 1 else np.array([entry_age])
        favored = str(rng.choice(list(GROUP_NAMES)))
        for j, age in enumerate(ages):
            group = favored if j == len(ages) - 1 else str(rng.choice(list(GROUP_NAMES)))
            title_fmt, subtitle = _TITLES[group][int(rng.integers(len(_TITLES[group])))]
            title = title_fmt % (j + 1) if "%d" in title_fmt else title_fmt
            # land between age and age+1 completed years after birth
            reg_date = birth + dt.timedelta(days=round(int(age) * 365.25)
                                            + int(rng.integers(40, 300)))
            season = _season_of(reg_date)
            records.append(RegistrationRecord(
                client_id=client_id,
                birth_date=birth,
                gender=gender,
                neighborhood=neighborhood,
                account_created=max(account, dt.date(2000, 1, 2)),
                registration_id=f"R{len(records):06d}",
                course_id=f"K{rng.integers(100, 400)}",
                course_title=title,
                course_subtitle=subtitle,
                season=season,
                registration_date=reg_date,
                completed=bool(rng.random() > 0.06),
                max_registrants=int(rng.choice([1, 8, 12, 20], p=[0.04, 0.32, 0.32, 0.32])),
                subsidized=bool(rng.random() < 0.2),
            ))
    records = records[:n_records]
    # guarantee at least one standalone client per rejection reason
    replacements = [
        _clone(records[-1], client_id="CX0001", birth_date=dt.date(1999, 5, 5),
               account_created=dt.date(2001, 1, 1), registration_date=dt.date(2005, 7, 1)),
        _clone(records[-2], client_id="CX0002", account_created=dt.date(1999, 12, 31)),
        _clone(records[-3], client_id="CX0003", max_registrants=1),
        _clone(records[-4], client_id="CX0004", completed=False),
    ]
    records[-4:] = replacements[::-1]
    return records


def _clone(record: RegistrationRecord, **overrides) -> RegistrationRecord:
    from dataclasses import replace

    return replace(record, **overrides)


# --- bundled fixture directory --------------------------------------------------------

def packaged_catalog() -> list[CensusVariable]:
    """The 147-variable census catalog shipped with the package."""
    from importlib import resources

    with resources.files("vulnscape").joinpath("resources/census_catalog.csv").open(
            "r", encoding="utf-8") as fh:
        return vio.load_catalog(fh)


def packaged_rules():
    """The editable 8-group classification rules shipped with the package."""
    from importlib import resources

    from .retention import load_rules

    with resources.files("vulnscape").joinpath("resources/grouping_rules.csv").open(
            "r", encoding="utf-8") as fh:
        return load_rules(fh)


def make_fixture_dir(path, seed: int = 0) -> Path:
    """Write a complete synthetic data directory (EDI, census, geometry,
    registrations, grouping rules) and return its path."""
    from .geo import assign_da
    from .retention import write_rules

    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)

    records, truth = synthetic_edi(seed)
    vio.write_edi(records, out / "edi.csv")

    catalog = packaged_catalog()
    vio.write_catalog(catalog, out / "catalog.csv")

    da_geo, nbhd_geo = synthetic_geometry(seed + 1)
    names = {n.id: n.name for n in neighborhood_ids()}
    with open(out / "da.geojson", "w", encoding="utf-8") as fh:
        json.dump(geojson_from_geometry_set(da_geo), fh)
    with open(out / "neighborhoods.geojson", "w", encoding="utf-8") as fh:
        json.dump(geojson_from_geometry_set(nbhd_geo, names), fh)

    assignments = assign_da(da_geo, nbhd_geo)
    table = synthetic_census(seed + 2, assignments, truth, catalog)
    _write_da_table(table, out / "census_da.csv")

    vio.write_registrations(synthetic_registrations(seed + 3), out / "class.csv")
    write_rules(DEFAULT_RULES, out / "rules.csv")
    return out


def _write_da_table(table: vio.DaTable, path) -> None:
    from .io import _num, _writer

    with _writer(path) as (fh, writer):
        writer.writerow(["da_id", *table.var_ids])
        for da_id in table.da_ids():
            row = table.rows[da_id]
            writer.writerow([da_id] + [
                "" if row.get(v) is None else _num(row[v]) for v in table.var_ids])
