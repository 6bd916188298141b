"""Domain types for EDI, census, and program-registration data.

All records are immutable values that validate themselves on construction,
so a ``Dataset`` that exists is a dataset whose invariants hold.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field

from .errors import BaselineWaveError, DuplicateKey, RangeViolation, UnknownVariable

# Wave 1 set the vulnerability cutoff; only waves 2-6 are data points.
USABLE_WAVES: tuple[int, ...] = (2, 3, 4, 5, 6)

EDI_SCALES: tuple[str, ...] = (
    "physical",
    "social",
    "emotional",
    "language_cognitive",
    "communication",
)

# Scales plus the two aggregate vulnerability measures.
EDI_MEASURES: tuple[str, ...] = EDI_SCALES + ("one_or_more", "two_or_more")

CENSUS_CATEGORIES: frozenset[str] = frozenset({
    "Geography",
    "EthnicOrigins",
    "LanguageImmigration",
    "Income",
    "CostOfLiving",
    "Employment",
    "Occupation",
    "Population",
})

CENSUS_KINDS: frozenset[str] = frozenset({"count", "percent", "median", "mean", "ratio", "rate"})

GENDERS: tuple[str, ...] = ("male", "female", "unspecified")

SEASONS: tuple[str, ...] = ("Winter", "Spring", "Summer", "Fall")


def validate_wave(wave: int, row: int | None = None) -> int:
    if wave == 1:
        raise BaselineWaveError(row)
    if wave not in USABLE_WAVES:
        raise RangeViolation("wave", f"wave {wave} outside usable range {USABLE_WAVES[0]}-{USABLE_WAVES[-1]}", row)
    return wave


@dataclass(frozen=True, order=True)
class NeighborhoodId:
    """Short stable token plus a display name for one HELP neighborhood."""

    id: str
    name: str

    def __post_init__(self):
        if not self.id:
            raise RangeViolation("neighborhood_id", "empty id")
        if not self.name:
            raise RangeViolation("neighborhood_name", "empty name")


@dataclass(frozen=True)
class EdiRecord:
    """One neighborhood x wave row of vulnerability percentages.

    The five scale percentages form the point in R^5 used for embedding;
    ``one_or_more`` / ``two_or_more`` are the aggregate measures used for
    cluster ranking.
    """

    neighborhood: NeighborhoodId
    wave: int
    n_children: int
    physical: float
    social: float
    emotional: float
    language_cognitive: float
    communication: float
    one_or_more: float
    two_or_more: float

    def __post_init__(self):
        validate_wave(self.wave)
        if self.n_children < 0:
            raise RangeViolation("n_children", f"negative count {self.n_children}")
        for name in EDI_MEASURES:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise RangeViolation(name, f"non-finite value {value!r}")
            if not 0.0 <= value <= 100.0:
                raise RangeViolation(name, f"{value} outside [0, 100]")
        if self.two_or_more > self.one_or_more:
            raise RangeViolation(
                "two_or_more",
                f"{self.two_or_more} exceeds one_or_more={self.one_or_more}",
            )

    def scale_vector(self) -> tuple[float, ...]:
        """The 5-scale vulnerability vector."""
        return tuple(getattr(self, s) for s in EDI_SCALES)

    def value(self, measure: str) -> float:
        if measure not in EDI_MEASURES:
            raise RangeViolation("scale", f"unknown EDI measure {measure!r}")
        return getattr(self, measure)


@dataclass(frozen=True)
class CensusVariable:
    """One cataloged census variable and its aggregation kind.

    ``kind`` drives DA-to-neighborhood aggregation.  ``numerator`` /
    ``denominator`` optionally link a ratio variable to the count variables
    it was derived from, letting aggregation recompute it exactly.
    """

    var_id: str
    label: str
    category: str
    kind: str
    numerator: str | None = None
    denominator: str | None = None

    def __post_init__(self):
        if not self.var_id:
            raise RangeViolation("var_id", "empty variable id")
        if self.category not in CENSUS_CATEGORIES:
            raise RangeViolation("category", f"unknown category {self.category!r}")
        if self.kind not in CENSUS_KINDS:
            raise RangeViolation("kind", f"unknown kind {self.kind!r}")


@dataclass(frozen=True)
class CensusProfile:
    """Per-neighborhood census values; a missing var_id means no data, not 0."""

    neighborhood: str
    values: dict[str, float] = field(default_factory=dict)

    def get(self, var_id: str) -> float | None:
        return self.values.get(var_id)


@dataclass(frozen=True)
class RegistrationRecord:
    """One client x course registration from the recreation-programs extract."""

    client_id: str
    birth_date: dt.date
    gender: str
    neighborhood: str | None
    account_created: dt.date
    registration_id: str
    course_id: str
    course_title: str
    course_subtitle: str
    season: str
    registration_date: dt.date
    completed: bool
    max_registrants: int
    subsidized: bool

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise RangeViolation("gender", f"unnormalized gender {self.gender!r}")
        if self.season not in SEASONS:
            raise RangeViolation("season", f"unknown season {self.season!r}")
        if self.max_registrants < 0:
            raise RangeViolation("max_registrants", f"negative count {self.max_registrants}")
        if self.registration_date < self.birth_date:
            raise RangeViolation("registration_date", "registration precedes birth date")


@dataclass(frozen=True)
class Dataset:
    """Validated EDI + census container; checks are re-runnable and idempotent."""

    edi: tuple[EdiRecord, ...]
    census: tuple[CensusProfile, ...] = ()
    catalog: tuple[CensusVariable, ...] = ()
    neighborhoods: tuple[NeighborhoodId, ...] = ()

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        ids = [n.id for n in self.neighborhoods]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise DuplicateKey(dupes[0], 0)
        known = set(ids)
        seen: set[tuple[str, int]] = set()
        for rec in self.edi:
            if rec.neighborhood.id not in known:
                raise RangeViolation("neighborhood", f"unknown neighborhood {rec.neighborhood.id!r}")
            key = (rec.neighborhood.id, rec.wave)
            if key in seen:
                raise DuplicateKey(*key)
            seen.add(key)
        catalog_ids = {v.var_id for v in self.catalog}
        for profile in self.census:
            if profile.neighborhood not in known:
                raise RangeViolation("neighborhood", f"unknown neighborhood {profile.neighborhood!r}")
            if catalog_ids:
                for var_id in profile.values:
                    if var_id not in catalog_ids:
                        raise UnknownVariable(var_id)

    def waves(self) -> list[int]:
        return sorted({r.wave for r in self.edi})

    def record(self, neighborhood_id: str, wave: int) -> EdiRecord | None:
        for rec in self.edi:
            if rec.neighborhood.id == neighborhood_id and rec.wave == wave:
                return rec
        return None

    def edi_by_key(self) -> dict[tuple[str, int], EdiRecord]:
        return {(r.neighborhood.id, r.wave): r for r in self.edi}

    def children_by_neighborhood(self, wave: int | None = None) -> dict[str, int]:
        """Child counts per neighborhood, defaulting to the latest wave."""
        if wave is None:
            wave = max(self.waves())
        return {r.neighborhood.id: r.n_children for r in self.edi if r.wave == wave}


def dataset_from_edi(records: list[EdiRecord],
                     census: list[CensusProfile] | None = None,
                     catalog: list[CensusVariable] | None = None) -> Dataset:
    """Assemble a Dataset, deriving the neighborhood list from the EDI records."""
    seen: dict[str, NeighborhoodId] = {}
    for rec in records:
        seen.setdefault(rec.neighborhood.id, rec.neighborhood)
    return Dataset(
        edi=tuple(records),
        census=tuple(census or ()),
        catalog=tuple(catalog or ()),
        neighborhoods=tuple(seen[i] for i in sorted(seen)),
    )
