"""Seeded synthetic cohorts with exactly known planted structure.

The generator builds each learner's video trajectory constructively so that
every behavior-pattern count is planted by design, not estimated:

* The base is a forward walk: on each active day the learner watches a run
  of brand-new videos in catalog order.  Such a walk provably contains zero
  instances of any pattern.
* ``return_recent`` instances are planted by overlapping chosen consecutive
  active-day pairs: the later day opens with the exact video the earlier day
  closed on.
* ``return_long`` instances are planted as end-phase replay days, one old
  day-0 video per day, always separated from the original viewing by at
  least one other active day.
* ``return_skipped`` instances are planted by skipping a catalog index
  mid-walk and adding a makeup day that first-accesses it afterward.

The phases are arranged so no motif contaminates another counter, and the
generator re-counts every trajectory with its own brute-force scan to prove
it; the planted numbers are exact ground truth for the detectors.  Grades
follow a linear model in the planted counts plus Gaussian noise, so grade
cutoffs are plantable too.  Forum days are drawn per day with a probability
kernel keyed on video activity at configurable offsets, which makes
video-to-forum lag effects (or their absence, for calibration nulls)
constructible as well.  Everything is driven by one integer seed: the same
seed always yields byte-identical cohorts.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from datetime import timedelta
from typing import Mapping, Sequence

from .dat import CourseSpec, Dat
from .ingest import (Cohort, LearnerRecord, LearnerTrajectories, RawEvent)

PATTERN_NAMES = ("return_recent", "return_long", "return_skipped")


@dataclass(frozen=True)
class Archetype:
    """One behavior profile: how active, how orderly, how rewarded.

    pattern_counts maps a pattern name to an inclusive (lo, hi) range; each
    learner's planted count is drawn uniformly from it.  forum_kernel maps a
    day offset to the forum probability used when the learner was
    video-active offset days earlier (the maximum applicable probability
    wins, with forum_base_prob as the floor).  dropout, when set, draws a
    day from the inclusive range and silences the learner from that day on.
    """

    name: str
    proportion: float
    activity_prob: float = 0.25
    videos_per_day: tuple[int, int] = (1, 3)
    pattern_counts: Mapping[str, tuple[int, int]] = field(default_factory=dict)
    dropout: tuple[int, int] | None = None
    forum_base_prob: float = 0.05
    forum_kernel: Mapping[int, float] = field(default_factory=dict)
    problem_prob: float = 0.0
    grade_base: float = 0.5
    grade_coeffs: Mapping[str, float] = field(default_factory=dict)
    grade_noise: float = 0.05

    def __post_init__(self) -> None:
        if not (0.0 < self.proportion <= 1.0):
            raise ValueError("proportion must lie in (0, 1]")
        if not (0.0 < self.activity_prob <= 1.0):
            raise ValueError("activity_prob must lie in (0, 1]")
        lo, hi = self.videos_per_day
        if not (1 <= lo <= hi):
            raise ValueError("videos_per_day range must satisfy 1 <= lo <= hi")
        for pattern, (p_lo, p_hi) in self.pattern_counts.items():
            if pattern not in PATTERN_NAMES:
                raise ValueError(f"unknown pattern {pattern!r}")
            if not (0 <= p_lo <= p_hi):
                raise ValueError(f"bad count range for {pattern}: {(p_lo, p_hi)}")


@dataclass(frozen=True)
class CohortPlan:
    """Everything generate() needs besides the course itself."""

    n_learners: int
    archetypes: tuple[Archetype, ...]
    seed: int = 0
    certified_threshold: float = 0.6
    duplicate_event_prob: float = 0.0

    def __post_init__(self) -> None:
        if self.n_learners < 1:
            raise ValueError("need at least one learner")
        if not self.archetypes:
            raise ValueError("need at least one archetype")
        total = sum(a.proportion for a in self.archetypes)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"archetype proportions sum to {total}, expected 1")
        names = [a.name for a in self.archetypes]
        if len(set(names)) != len(names):
            raise ValueError("archetype names must be unique")


@dataclass(frozen=True)
class PlantedLearner:
    """Ground truth for one generated learner."""

    learner_id: str
    archetype: str
    pattern_counts: Mapping[str, int]
    grade: float
    certified: bool
    group_y: bool
    n_video_days: int
    dropout_day: int | None


@dataclass(frozen=True)
class SyntheticCohort:
    """Generated events, metadata, and the ground truth behind them."""

    spec: CourseSpec
    plan: CohortPlan
    events: tuple[RawEvent, ...]
    records: tuple[LearnerRecord, ...]
    truth: tuple[PlantedLearner, ...]

    def truth_by_id(self) -> dict[str, PlantedLearner]:
        return {t.learner_id: t for t in self.truth}


class InfeasiblePlanError(ValueError):
    """The plan asks for more structure than the course can hold."""


def _brute_counts(entries: Sequence[tuple[int, int]]) -> dict[str, int]:
    """Independent O(n^2) pattern recount used to self-check construction."""
    by_day: dict[int, set[int]] = {}
    for day, comp in entries:
        by_day.setdefault(day, set()).add(comp)
    days = sorted(by_day)

    recent = 0
    for prev, nxt in zip(days, days[1:]):
        if min(by_day[nxt]) == max(by_day[prev]):
            recent += 1

    long_count = 0
    for day, comp in sorted(set(entries)):
        earlier = [d for d in days if d < day and comp in by_day[d]]
        if not earlier:
            continue
        last = max(earlier)
        if any(last < d < day for d in days):
            long_count += 1

    skipped = 0
    first_day: dict[int, int] = {}
    for day, comp in sorted(set(entries)):
        if comp not in first_day:
            first_day[comp] = day
    for comp, day in first_day.items():
        if any(d < day and any(c > comp for c in by_day[d]) for d in days):
            skipped += 1

    return {"return_recent": recent, "return_long": long_count,
            "return_skipped": skipped}


def _plant_video_walk(
    rng: random.Random,
    n_videos: int,
    effective_end: int,
    archetype: Archetype,
    wanted: dict[str, int],
) -> list[tuple[int, int]]:
    """Build one video trajectory with exactly the wanted pattern counts."""
    k_rec = wanted["return_recent"]
    k_long = wanted["return_long"]
    k_skip = wanted["return_skipped"]
    tail = k_long + k_skip
    walk_end = effective_end - tail
    need_w = max(1, k_rec + 1, k_skip + 1, 2 if k_long else 1)
    if walk_end < need_w:
        raise InfeasiblePlanError(
            f"{archetype.name}: needs {need_w} walk days plus {tail} tail days, "
            f"but only {effective_end} days are available"
        )

    walk_days = [0] + [d for d in range(1, walk_end)
                       if rng.random() < archetype.activity_prob]
    if len(walk_days) < need_w:
        # top up deterministically with the earliest inactive days
        present = set(walk_days)
        for d in range(1, walk_end):
            if d not in present:
                walk_days.append(d)
                present.add(d)
                if len(walk_days) == need_w:
                    break
    walk_days.sort()
    n_w = len(walk_days)

    new_per_day = [rng.randint(*archetype.videos_per_day) for _ in range(n_w)]
    new_per_day[0] = max(new_per_day[0], k_long + 1)
    budget = n_videos - k_skip
    if (n_w - 1) + (k_long + 1) > budget:
        raise InfeasiblePlanError(
            f"{archetype.name}: walk of {n_w} days cannot fit a catalog of "
            f"{n_videos} videos with {k_skip} skips and {k_long} replays"
        )
    while sum(new_per_day) > budget:
        for i in range(n_w - 1, 0, -1):
            if new_per_day[i] > 1 and sum(new_per_day) > budget:
                new_per_day[i] -= 1
        if new_per_day[0] > k_long + 1 and sum(new_per_day) > budget:
            new_per_day[0] -= 1

    overlap_pairs = set(rng.sample(range(n_w - 1), k_rec)) if k_rec else set()
    skip_days = set(rng.sample(range(1, n_w), k_skip)) if k_skip else set()

    entries: list[tuple[int, int]] = []
    skipped_videos: list[int] = []
    pointer = 0
    last_video = -1
    for idx, day in enumerate(walk_days):
        if idx > 0 and (idx - 1) in overlap_pairs:
            entries.append((day, last_video))
        if idx in skip_days:
            skipped_videos.append(pointer)
            pointer += 1
        for _ in range(new_per_day[idx]):
            entries.append((day, pointer))
            pointer += 1
        last_video = pointer - 1

    replay_videos = rng.sample(range(new_per_day[0] - 1), k_long) if k_long else []
    for j in range(k_long):
        entries.append((walk_end + j, replay_videos[j]))
    for j in range(k_skip):
        entries.append((walk_end + k_long + j, skipped_videos[j]))
    return entries


def _draw_forum_days(
    rng: random.Random,
    video_days: set[int],
    effective_end: int,
    archetype: Archetype,
) -> list[int]:
    days = []
    for day in range(effective_end):
        p = archetype.forum_base_prob
        for offset, boost in archetype.forum_kernel.items():
            if (day - offset) in video_days:
                p = max(p, boost)
        if rng.random() < p:
            days.append(day)
    return days


def _has_group_y(video_days: set[int], forum_days: set[int],
                 duration: int, window: int = 2) -> bool:
    for day in video_days:
        stop = min(day + window, duration - 1)
        if any(t in forum_days for t in range(day, stop + 1)):
            return True
    return False


def generate(plan: CohortPlan, spec: CourseSpec) -> SyntheticCohort:
    """Generate a cohort with exact planted pattern counts.

    Deterministic in (plan, spec): the same inputs produce identical events,
    records, and ground truth.  Raises InfeasiblePlanError when an archetype
    demands more pattern instances than the course can hold, and RuntimeError
    if the internal recount ever disagrees with the plant (a generator bug).
    """
    master = random.Random(plan.seed)
    n_videos = spec.n_components("video")
    n_problems = spec.n_components("problem")
    n_forums = spec.n_components("forum")
    duration = spec.duration_days
    id_width = max(6, len(str(plan.n_learners - 1)))

    arch_names = [a.name for a in plan.archetypes]
    arch_weights = [a.proportion for a in plan.archetypes]
    arch_by_name = {a.name: a for a in plan.archetypes}

    events: list[RawEvent] = []
    records: list[LearnerRecord] = []
    truth: list[PlantedLearner] = []

    for i in range(plan.n_learners):
        learner_id = f"L{i:0{id_width}d}"
        arch = arch_by_name[master.choices(arch_names, weights=arch_weights)[0]]
        rng = random.Random(master.getrandbits(64))

        wanted = {p: 0 for p in PATTERN_NAMES}
        for pattern, (lo, hi) in arch.pattern_counts.items():
            wanted[pattern] = rng.randint(lo, hi)

        dropout_day: int | None = None
        effective_end = duration
        if arch.dropout is not None:
            lo, hi = arch.dropout
            dropout_day = rng.randint(lo, min(hi, duration))
            effective_end = min(dropout_day, duration)

        video_entries = _plant_video_walk(rng, n_videos, effective_end, arch, wanted)
        recount = _brute_counts(video_entries)
        if recount != wanted:
            raise RuntimeError(
                f"planting bug for {learner_id}: wanted {wanted}, recount {recount}"
            )

        video_days = {d for d, _ in video_entries}
        forum_day_list = _draw_forum_days(rng, video_days, effective_end, arch)
        forum_entries = []
        for day in forum_day_list:
            n_threads = rng.randint(1, min(2, n_forums))
            for comp in rng.sample(range(n_forums), n_threads):
                forum_entries.append((day, comp))

        problem_entries = []
        if arch.problem_prob > 0.0 and n_problems > 0:
            for day in sorted(video_days):
                if rng.random() < arch.problem_prob:
                    problem_entries.append((day, rng.randrange(n_problems)))

        grade = arch.grade_base
        for pattern, coeff in arch.grade_coeffs.items():
            grade += coeff * wanted[pattern]
        grade += rng.gauss(0.0, arch.grade_noise)
        grade = min(1.0, max(0.0, grade))
        certified = grade >= plan.certified_threshold

        group_y = _has_group_y(video_days, set(forum_day_list), duration)

        records.append(LearnerRecord(learner_id, grade, certified))
        truth.append(PlantedLearner(
            learner_id, arch.name, dict(wanted), grade, certified,
            group_y, len(video_days), dropout_day,
        ))

        for category, entry_list in (("video", video_entries),
                                     ("problem", problem_entries),
                                     ("forum", forum_entries)):
            catalog = spec.catalogs[category]
            for day, comp in entry_list:
                ts = spec.launch + timedelta(days=day, seconds=rng.randrange(86400))
                events.append(RawEvent(learner_id, ts, category, catalog[comp]))
                if plan.duplicate_event_prob and rng.random() < plan.duplicate_event_prob:
                    ts2 = spec.launch + timedelta(days=day, seconds=rng.randrange(86400))
                    events.append(RawEvent(learner_id, ts2, category, catalog[comp]))

    events.sort(key=lambda e: (e.timestamp, e.learner_id, e.category, e.component_id))
    return SyntheticCohort(spec, plan, tuple(events), tuple(records), tuple(truth))


def null_cohort(
    n_learners: int,
    spec: CourseSpec,
    seed: int,
    *,
    video_prob: float = 0.2,
    forum_prob: float = 0.05,
    forum_kernel: Mapping[int, float] | None = None,
    videos_per_day: tuple[int, int] = (1, 3),
    grade_mean: float = 0.6,
    grade_sd: float = 0.15,
    certified_threshold: float = 0.6,
) -> Cohort:
    """A cohort with no planted behavior-grade link, built directly in memory.

    Video days are independent Bernoulli draws; active days watch a few
    uniformly random videos.  Forum days are Bernoulli with forum_prob, or
    with the kernel probability when the learner was video-active at the
    kernel's offset (so a kernel of {0: p} plants same-day dependence and no
    kernel at all yields exact independence).  Grades are Gaussian,
    independent of everything: the null for every behavior-grade test.
    """
    if n_learners < 1:
        raise ValueError("need at least one learner")
    master = random.Random(seed)
    n_videos = spec.n_components("video")
    n_forums = spec.n_components("forum")
    duration = spec.duration_days
    id_width = max(6, len(str(n_learners - 1)))
    kernel = dict(forum_kernel) if forum_kernel else {}

    learners: dict[str, LearnerTrajectories] = {}
    for i in range(n_learners):
        learner_id = f"N{i:0{id_width}d}"
        rng = random.Random(master.getrandbits(64))
        video_days = [d for d in range(duration) if rng.random() < video_prob]
        video_entries = []
        for day in video_days:
            k = rng.randint(*videos_per_day)
            for comp in rng.sample(range(n_videos), min(k, n_videos)):
                video_entries.append((day, comp))
        video_day_set = set(video_days)
        forum_entries = []
        for day in range(duration):
            p = forum_prob
            for offset, boost in kernel.items():
                if (day - offset) in video_day_set:
                    p = max(p, boost)
            if rng.random() < p:
                forum_entries.append((day, rng.randrange(n_forums)))
        grade = min(1.0, max(0.0, rng.gauss(grade_mean, grade_sd)))
        record = LearnerRecord(learner_id, grade, grade >= certified_threshold)
        learners[learner_id] = LearnerTrajectories(record, {
            "video": Dat(learner_id, "video", tuple(video_entries)),
            "problem": Dat(learner_id, "problem", ()),
            "forum": Dat(learner_id, "forum", tuple(forum_entries)),
        })
    return Cohort(spec, learners)
