"""From raw event logs to a cohort of per-learner trajectories.

Events arrive as JSON lines carrying (learner_id, timestamp, category,
component_id).  Timestamps are bucketed into day indices relative to the
course launch; events before launch or past the course end are dropped and
counted, as are events naming components missing from the catalog.  The
result is a Cohort: every learner with at least one usable event, each
holding one trajectory per category plus their metadata record.  Building a
cohort is order-insensitive: permuting the event stream yields an identical
cohort.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Iterator, Mapping, Sequence

from .dat import CATEGORIES, CourseSpec, Dat

EDUCATION_LEVELS = ("primary", "junior_high", "senior_high", "college",
                    "graduate", "unknown")
INCOME_TIERS = ("low", "lower_middle", "upper_middle", "high", "unknown")


@dataclass(frozen=True)
class RawEvent:
    """One access event from the clickstream."""

    learner_id: str
    timestamp: datetime
    category: str
    component_id: str

    def __post_init__(self) -> None:
        if not self.learner_id:
            raise ValueError("learner_id must be non-empty")
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if not self.component_id:
            raise ValueError("component_id must be non-empty")
        ts = self.timestamp
        if ts.tzinfo is None:
            ts = ts.replace(tzinfo=timezone.utc)
            object.__setattr__(self, "timestamp", ts)


@dataclass(frozen=True)
class LearnerRecord:
    """Metadata for one learner."""

    learner_id: str
    grade: float | None = None
    certified: bool = False
    education_level: str = "unknown"
    income_tier: str = "unknown"

    def __post_init__(self) -> None:
        if not self.learner_id:
            raise ValueError("learner_id must be non-empty")
        if self.grade is not None and not (0.0 <= float(self.grade) <= 1.0):
            raise ValueError(f"grade must lie in [0, 1], got {self.grade}")
        if self.education_level not in EDUCATION_LEVELS:
            raise ValueError(f"unknown education level {self.education_level!r}")
        if self.income_tier not in INCOME_TIERS:
            raise ValueError(f"unknown income tier {self.income_tier!r}")


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 timestamp; naive values are taken as UTC."""
    ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


@dataclass(frozen=True)
class ParseReport:
    """Outcome of reading an event stream."""

    n_lines: int
    malformed: tuple[tuple[int, str], ...]

    @property
    def n_malformed(self) -> int:
        return len(self.malformed)


def parse_events(
    lines: Iterable[str], max_malformed_fraction: float = 0.1
) -> tuple[list[RawEvent], ParseReport]:
    """Parse JSON-lines events, collecting malformed lines by number.

    Blank lines are skipped.  If more than max_malformed_fraction of the
    non-blank lines fail to parse, the whole stream is rejected.
    """
    events: list[RawEvent] = []
    malformed: list[tuple[int, str]] = []
    n_lines = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        n_lines += 1
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("event must be a JSON object")
            event = RawEvent(
                learner_id=str(obj["learner_id"]),
                timestamp=parse_timestamp(str(obj["timestamp"])),
                category=str(obj["category"]),
                component_id=str(obj["component_id"]),
            )
        except (KeyError, ValueError, TypeError) as exc:
            malformed.append((lineno, f"{type(exc).__name__}: {exc}"))
            continue
        events.append(event)
    report = ParseReport(n_lines, tuple(malformed))
    if n_lines and report.n_malformed / n_lines > max_malformed_fraction:
        raise ValueError(
            f"{report.n_malformed} of {n_lines} event lines are malformed, "
            f"exceeding the tolerated fraction {max_malformed_fraction}"
        )
    return events, report


def day_index(timestamp: datetime, spec: CourseSpec) -> int | None:
    """Day bucket of a timestamp, or None when outside the course window."""
    ts = timestamp if timestamp.tzinfo is not None else timestamp.replace(tzinfo=timezone.utc)
    days = (ts - spec.launch).days
    if 0 <= days < spec.duration_days:
        return days
    return None


@dataclass(frozen=True)
class LearnerTrajectories:
    """One learner's record plus one trajectory per category."""

    record: LearnerRecord
    dats: Mapping[str, Dat]

    @property
    def learner_id(self) -> str:
        return self.record.learner_id


@dataclass(frozen=True)
class Cohort:
    """All learners of one course run, addressable by learner id."""

    spec: CourseSpec
    learners: Mapping[str, LearnerTrajectories] = field(repr=False)

    def __post_init__(self) -> None:
        for learner_id, traj in self.learners.items():
            if learner_id != traj.learner_id:
                raise ValueError(f"key {learner_id!r} does not match record "
                                 f"{traj.learner_id!r}")
            for category in CATEGORIES:
                if category not in traj.dats:
                    raise ValueError(f"learner {learner_id!r} lacks a {category} trajectory")

    def __len__(self) -> int:
        return len(self.learners)

    def __contains__(self, learner_id: str) -> bool:
        return learner_id in self.learners

    def __iter__(self) -> Iterator[str]:
        return iter(self.learner_ids)

    @property
    def learner_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.learners))

    def get(self, learner_id: str) -> LearnerTrajectories:
        return self.learners[learner_id]

    def dat(self, learner_id: str, category: str) -> Dat:
        return self.learners[learner_id].dats[category]

    def record(self, learner_id: str) -> LearnerRecord:
        return self.learners[learner_id].record

    def dats(self, category: str) -> list[Dat]:
        """Trajectories of one category for all learners, sorted by id."""
        return [self.learners[i].dats[category] for i in self.learner_ids]


@dataclass(frozen=True)
class IngestReport:
    """Accounting of what happened to the event stream."""

    n_events_in: int
    n_events_used: int
    n_out_of_range: int
    n_unknown_component: int
    n_learners: int
    n_learners_without_metadata: int


def build_cohort(
    events: Sequence[RawEvent],
    records: Sequence[LearnerRecord],
    spec: CourseSpec,
) -> tuple[Cohort, IngestReport]:
    """Assemble trajectories from events plus metadata records.

    A learner enters the cohort when they have at least one event inside the
    course window naming a cataloged component.  Learners seen in events but
    absent from the metadata get a default record (no grade, not certified,
    unknown demographics).  Duplicate metadata rows are an error.
    """
    record_map: dict[str, LearnerRecord] = {}
    for record in records:
        if record.learner_id in record_map:
            raise ValueError(f"duplicate metadata for learner {record.learner_id!r}")
        record_map[record.learner_id] = record

    accesses: dict[str, dict[str, set[tuple[int, int]]]] = {}
    n_out_of_range = 0
    n_unknown = 0
    for event in events:
        day = day_index(event.timestamp, spec)
        if day is None:
            n_out_of_range += 1
            continue
        comp = spec.component_index(event.category).get(event.component_id)
        if comp is None:
            n_unknown += 1
            continue
        per_learner = accesses.setdefault(event.learner_id, {c: set() for c in CATEGORIES})
        per_learner[event.category].add((day, comp))

    learners: dict[str, LearnerTrajectories] = {}
    n_default = 0
    for learner_id, per_category in accesses.items():
        record = record_map.get(learner_id)
        if record is None:
            record = LearnerRecord(learner_id)
            n_default += 1
        dats = {
            category: Dat(learner_id, category, tuple(per_category[category]))
            for category in CATEGORIES
        }
        learners[learner_id] = LearnerTrajectories(record, dats)

    cohort = Cohort(spec, learners)
    n_used = len(events) - n_out_of_range - n_unknown
    report = IngestReport(len(events), n_used, n_out_of_range, n_unknown,
                          len(learners), n_default)
    return cohort, report


_FILTER_KEYS = ("certified", "education_level", "income_tier",
                "grade_min", "grade_max", "has_grade")


def filter_cohort(cohort: Cohort, criteria: Mapping[str, object]) -> Cohort:
    """Subset a cohort by metadata.

    Supported criteria: certified (bool), education_level / income_tier
    (value or set of values), grade_min / grade_max (learners without a
    grade are excluded), has_grade (bool).
    """
    for key in criteria:
        if key not in _FILTER_KEYS:
            raise ValueError(f"unknown filter {key!r}, expected one of {_FILTER_KEYS}")

    def _matches(record: LearnerRecord) -> bool:
        if "certified" in criteria and record.certified != bool(criteria["certified"]):
            return False
        for key, attr in (("education_level", record.education_level),
                          ("income_tier", record.income_tier)):
            if key in criteria:
                wanted = criteria[key]
                allowed = {wanted} if isinstance(wanted, str) else set(wanted)  # type: ignore[arg-type]
                if attr not in allowed:
                    return False
        if "has_grade" in criteria and (record.grade is not None) != bool(criteria["has_grade"]):
            return False
        if "grade_min" in criteria:
            if record.grade is None or record.grade < float(criteria["grade_min"]):  # type: ignore[arg-type]
                return False
        if "grade_max" in criteria:
            if record.grade is None or record.grade > float(criteria["grade_max"]):  # type: ignore[arg-type]
                return False
        return True

    kept = {
        learner_id: traj
        for learner_id, traj in cohort.learners.items()
        if _matches(traj.record)
    }
    return Cohort(cohort.spec, kept)
