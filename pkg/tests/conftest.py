"""Shared fixtures: a standard course and hand-assembled cohorts."""

from __future__ import annotations

from datetime import datetime, timezone

import pytest

from datmine.dat import CATEGORIES, CourseSpec, Dat, dat_from_accesses
from datmine.ingest import Cohort, LearnerRecord, LearnerTrajectories


def make_course(duration_days: int = 70, n_videos: int = 44,
                n_problems: int = 20, n_forums: int = 10) -> CourseSpec:
    return CourseSpec(
        datetime(2024, 1, 6, tzinfo=timezone.utc),
        duration_days,
        {
            "video": tuple(f"v{i:03d}" for i in range(n_videos)),
            "problem": tuple(f"p{i:03d}" for i in range(n_problems)),
            "forum": tuple(f"f{i:03d}" for i in range(n_forums)),
        },
    )


@pytest.fixture
def course() -> CourseSpec:
    return make_course()


def make_cohort(spec: CourseSpec, learners: dict) -> Cohort:
    """Assemble a Cohort from {learner_id: {category: [(day, comp)...],
    "grade": float|None, "certified": bool}} without going through events."""
    built: dict[str, LearnerTrajectories] = {}
    for learner_id, payload in learners.items():
        record = LearnerRecord(
            learner_id,
            payload.get("grade"),
            bool(payload.get("certified", False)),
            payload.get("education_level", "unknown"),
            payload.get("income_tier", "unknown"),
        )
        dats = {
            category: dat_from_accesses(payload.get(category, []), spec,
                                        category, learner_id)
            for category in CATEGORIES
        }
        built[learner_id] = LearnerTrajectories(record, dats)
    return Cohort(spec, built)


def random_entries(rng, n_days: int, n_comps: int, density: float = 0.08):
    """Random sparse (day, comp) entry set, possibly empty."""
    entries = []
    for day in range(n_days):
        for comp in range(n_comps):
            if rng.random() < density:
                entries.append((day, comp))
    return entries


def random_dat(rng, spec: CourseSpec, category: str = "video",
               density: float = 0.08, learner_id: str = "L") -> Dat:
    entries = random_entries(rng, spec.duration_days,
                             spec.n_components(category), density)
    return dat_from_accesses(entries, spec, category, learner_id)
