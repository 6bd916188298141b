"""Cohort analysis of program registrations: filtering, activity grouping,
per-client journeys, and the entry/exit/span/season distribution tables.

Records are filtered with the strict inclusion rules (post-2000 accounts
and births, community-inclusive courses, completed registrations), grouped
into eight activity families, and reduced to one journey per client from
which all summary tables derive.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

from .errors import EmptyInput, MissingPopulation, RangeViolation
from .model import RegistrationRecord

GROUP_NAMES: tuple[str, ...] = (
    "General Activities",
    "Day Camps",
    "Parent Participation",
    "Music/Dance/Theatre",
    "Aquatics",
    "Sports & Fitness",
    "Arts & Cooking",
    "Outdoor Education",
)

DEFAULT_GROUP = "General Activities"

FACETS = (
    "entry_age",
    "exit_age",
    "span",
    "entry_group_gender",
    "exit_group_gender",
    "season_entry_age_group",
    "neighborhood_share",
)

UNASSIGNED = "NA"


@dataclass(frozen=True)
class FilterPolicy:
    """Strict record filters, applied in order; the first failure labels
    the rejection."""

    min_account_created: dt.date = dt.date(2000, 1, 1)
    min_birth_date: dt.date = dt.date(2000, 1, 1)
    require_completed: bool = True
    min_max_registrants_exclusive: int = 1


@dataclass(frozen=True)
class GroupingRules:
    """Ordered (pattern, group) rules; first case-insensitive substring
    match over title + subtitle wins, else the default group."""

    rules: tuple[tuple[str, str], ...]
    default_group: str = DEFAULT_GROUP

    def __post_init__(self):
        for pattern, group in self.rules:
            if not pattern:
                raise RangeViolation("pattern", "empty pattern")
            if group not in GROUP_NAMES:
                raise RangeViolation("group", f"{group!r} is not one of the 8 activity groups")
        if self.default_group not in GROUP_NAMES:
            raise RangeViolation("default_group", f"{self.default_group!r} is not a known group")

    def group_names(self) -> set[str]:
        return {g for _, g in self.rules} | {self.default_group}


DEFAULT_RULES = GroupingRules(rules=(
    ("parent", "Parent Participation"),
    ("family", "Parent Participation"),
    ("tot ", "Parent Participation"),
    ("camp", "Day Camps"),
    ("swim", "Aquatics"),
    ("aquatic", "Aquatics"),
    ("water safety", "Aquatics"),
    ("lifesaving", "Aquatics"),
    ("dive", "Aquatics"),
    ("music", "Music/Dance/Theatre"),
    ("dance", "Music/Dance/Theatre"),
    ("ballet", "Music/Dance/Theatre"),
    ("theatre", "Music/Dance/Theatre"),
    ("drama", "Music/Dance/Theatre"),
    ("piano", "Music/Dance/Theatre"),
    ("guitar", "Music/Dance/Theatre"),
    ("sing", "Music/Dance/Theatre"),
    ("soccer", "Sports & Fitness"),
    ("hockey", "Sports & Fitness"),
    ("basketball", "Sports & Fitness"),
    ("skating", "Sports & Fitness"),
    ("skate", "Sports & Fitness"),
    ("gym", "Sports & Fitness"),
    ("fitness", "Sports & Fitness"),
    ("sport", "Sports & Fitness"),
    ("martial", "Sports & Fitness"),
    ("karate", "Sports & Fitness"),
    ("yoga", "Sports & Fitness"),
    ("tennis", "Sports & Fitness"),
    ("ball", "Sports & Fitness"),
    ("art", "Arts & Cooking"),
    ("paint", "Arts & Cooking"),
    ("craft", "Arts & Cooking"),
    ("pottery", "Arts & Cooking"),
    ("draw", "Arts & Cooking"),
    ("cook", "Arts & Cooking"),
    ("baking", "Arts & Cooking"),
    ("outdoor", "Outdoor Education"),
    ("nature", "Outdoor Education"),
    ("hike", "Outdoor Education"),
    ("adventure", "Outdoor Education"),
    ("environment", "Outdoor Education"),
))


@dataclass(frozen=True)
class Rejection:
    record: RegistrationRecord
    reason: str          # account_filter | birth_filter | inclusivity_filter | completion_filter
    row: int


@dataclass(frozen=True)
class ClientJourney:
    client_id: str
    gender: str
    neighborhood: str | None
    registrations: tuple[RegistrationRecord, ...]   # chronological
    entry_age: int
    exit_age: int
    span_years: int
    entry_group: str
    exit_group: str
    entry_season: str
    groups_touched: tuple[str, ...]

    def __post_init__(self):
        if self.entry_age > self.exit_age:
            raise RangeViolation("entry_age", "entry age exceeds exit age")
        if self.span_years < 0:
            raise RangeViolation("span_years", "negative span")


def apply_filters(records: list[RegistrationRecord],
                  policy: FilterPolicy = FilterPolicy()) -> tuple[list[RegistrationRecord], list[Rejection]]:
    """Partition records into kept and rejected-with-reason."""
    kept: list[RegistrationRecord] = []
    rejected: list[Rejection] = []
    for row, rec in enumerate(records):
        if rec.account_created <= policy.min_account_created:
            rejected.append(Rejection(rec, "account_filter", row))
        elif rec.birth_date <= policy.min_birth_date:
            rejected.append(Rejection(rec, "birth_filter", row))
        elif rec.max_registrants <= policy.min_max_registrants_exclusive:
            rejected.append(Rejection(rec, "inclusivity_filter", row))
        elif policy.require_completed and not rec.completed:
            rejected.append(Rejection(rec, "completion_filter", row))
        else:
            kept.append(rec)
    return kept, rejected


def classify(record: RegistrationRecord, rules: GroupingRules = DEFAULT_RULES) -> str:
    """First matching rule's group over title + subtitle, else the default."""
    text = f"{record.course_title} {record.course_subtitle}".lower()
    for pattern, group in rules.rules:
        if pattern.lower() in text:
            return group
    return rules.default_group


def completed_years(birth: dt.date, at: dt.date) -> int:
    """Whole years elapsed between birth and a given date."""
    years = at.year - birth.year
    if (at.month, at.day) < (birth.month, birth.day):
        years -= 1
    return years


def build_journeys(records: list[RegistrationRecord],
                   rules: GroupingRules = DEFAULT_RULES) -> list[ClientJourney]:
    """One journey per client: chronological registrations, entry/exit ages
    as completed years, span in calendar years, entry/exit groups attached.
    Same-day ties order by registration_id; output is invariant under input
    shuffling."""
    by_client: dict[str, list[RegistrationRecord]] = {}
    for rec in records:
        by_client.setdefault(rec.client_id, []).append(rec)

    journeys: list[ClientJourney] = []
    for client_id in sorted(by_client):
        regs = sorted(by_client[client_id],
                      key=lambda r: (r.registration_date, r.registration_id))
        first, last = regs[0], regs[-1]
        journeys.append(ClientJourney(
            client_id=client_id,
            gender=first.gender,
            neighborhood=first.neighborhood,
            registrations=tuple(regs),
            entry_age=completed_years(first.birth_date, first.registration_date),
            exit_age=completed_years(last.birth_date, last.registration_date),
            span_years=last.registration_date.year - first.registration_date.year,
            entry_group=classify(first, rules),
            exit_group=classify(last, rules),
            entry_season=first.season,
            groups_touched=tuple(sorted({classify(r, rules) for r in regs})),
        ))
    return journeys


@dataclass(frozen=True)
class FacetTable:
    """Tidy rows of (facet, key columns..., count, proportion).

    Proportions are normalized within ``normalizer`` key prefixes (the
    whole table when empty) and sum to 1 per normalization group.
    """

    facet: str
    key_columns: tuple[str, ...]
    rows: tuple[tuple, ...]          # (*keys, count, proportion)
    normalizer: tuple[str, ...] = ()


def distributions(journeys: list[ClientJourney], facet: str) -> FacetTable:
    """Histogram / proportion table for one facet of the journey set."""
    if not journeys:
        raise EmptyInput("no journeys to summarize")
    if facet == "entry_age":
        return _table(facet, ("entry_age",), [(j.entry_age,) for j in journeys])
    if facet == "exit_age":
        return _table(facet, ("exit_age",), [(j.exit_age,) for j in journeys])
    if facet == "span":
        return _table(facet, ("exit_group", "span_years"),
                      [(j.exit_group, j.span_years) for j in journeys],
                      normalizer=("exit_group",))
    if facet == "entry_group_gender":
        return _table(facet, ("entry_group", "gender", "entry_age"),
                      [(j.entry_group, j.gender, j.entry_age) for j in journeys],
                      normalizer=("entry_group", "gender"))
    if facet == "exit_group_gender":
        return _table(facet, ("exit_group", "gender", "exit_age"),
                      [(j.exit_group, j.gender, j.exit_age) for j in journeys],
                      normalizer=("exit_group", "gender"))
    if facet == "season_entry_age_group":
        return _table(facet, ("entry_season", "entry_age", "entry_group"),
                      [(j.entry_season, j.entry_age, j.entry_group) for j in journeys],
                      normalizer=("entry_season",))
    if facet == "neighborhood_share":
        return _table(facet, ("neighborhood",),
                      [(j.neighborhood or UNASSIGNED,) for j in journeys])
    raise RangeViolation("facet", f"unknown facet {facet!r}")


def _table(facet: str, key_columns: tuple[str, ...], keys: list[tuple],
           normalizer: tuple[str, ...] = ()) -> FacetTable:
    counts: dict[tuple, int] = {}
    for key in keys:
        counts[key] = counts.get(key, 0) + 1
    n_norm = len(normalizer)
    group_totals: dict[tuple, int] = {}
    for key, count in counts.items():
        group_totals[key[:n_norm]] = group_totals.get(key[:n_norm], 0) + count
    rows = tuple(
        (*key, count, count / group_totals[key[:n_norm]])
        for key, count in sorted(counts.items())
    )
    return FacetTable(facet=facet, key_columns=key_columns, rows=rows, normalizer=normalizer)


def enrollment_rates(journeys: list[ClientJourney], group: str,
                     populations: dict[str, int]) -> dict[str, float]:
    """Distinct clients whose journeys touch ``group`` per child in each
    neighborhood; neighborhoods with no journeys get rate 0.0.  Journeys
    without an assigned neighborhood are excluded."""
    if group not in GROUP_NAMES:
        raise RangeViolation("group", f"{group!r} is not one of the 8 activity groups")
    clients: dict[str, set[str]] = {n: set() for n in populations}
    for j in journeys:
        if j.neighborhood is None:
            continue
        if j.neighborhood not in populations:
            raise MissingPopulation(j.neighborhood)
        if group in j.groups_touched:
            clients[j.neighborhood].add(j.client_id)
    rates: dict[str, float] = {}
    for neighborhood in sorted(populations):
        population = populations[neighborhood]
        if population <= 0:
            raise MissingPopulation(neighborhood)
        rates[neighborhood] = len(clients[neighborhood]) / population
    return rates


# --- CSV interfaces --------------------------------------------------------------

def load_rules(path) -> GroupingRules:
    import csv

    from .errors import MissingColumn

    rules: list[tuple[str, str]] = []
    opener = open(path, "r", encoding="utf-8", newline="") if not hasattr(path, "read") else path
    with opener as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"pattern", "group"} <= set(reader.fieldnames):
            raise MissingColumn([c for c in ("pattern", "group")
                                 if c not in (reader.fieldnames or [])], getattr(path, "name", path))
        for row in reader:
            rules.append((row["pattern"], row["group"]))
    return GroupingRules(rules=tuple(rules))


def write_rules(rules: GroupingRules, path) -> None:
    from .io import _writer

    with _writer(path) as (fh, writer):
        writer.writerow(["pattern", "group"])
        for pattern, group in rules.rules:
            writer.writerow([pattern, group])


def write_facet_csv(table: FacetTable, path) -> None:
    from .io import _num, _writer

    with _writer(path) as (fh, writer):
        writer.writerow(["facet", *table.key_columns, "count", "proportion"])
        for row in table.rows:
            *keys, count, proportion = row
            writer.writerow([table.facet, *keys, count, _num(proportion)])


def write_journeys_csv(journeys: list[ClientJourney], path) -> None:
    from .io import _writer

    with _writer(path) as (fh, writer):
        writer.writerow(["client_id", "gender", "neighborhood", "n_registrations",
                         "entry_age", "exit_age", "span_years",
                         "entry_group", "exit_group", "entry_season"])
        for j in journeys:
            writer.writerow([j.client_id, j.gender, j.neighborhood or UNASSIGNED,
                             len(j.registrations), j.entry_age, j.exit_age, j.span_years,
                             j.entry_group, j.exit_group, j.entry_season])


def write_rates_csv(rates: dict[str, float], group: str, path) -> None:
    from .io import _num, _writer

    with _writer(path) as (fh, writer):
        writer.writerow(["neighborhood", "group", "rate"])
        for neighborhood in sorted(rates):
            writer.writerow([neighborhood, group, _num(rates[neighborhood])])


def write_rejections_csv(rejections: list[Rejection], path) -> None:
    from .io import _writer

    with _writer(path) as (fh, writer):
        writer.writerow(["row", "client_id", "registration_id", "reason"])
        for r in rejections:
            writer.writerow([r.row, r.record.client_id, r.record.registration_id, r.reason])
