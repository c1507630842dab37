"""Event parsing, day bucketing, cohort assembly, and metadata filters."""

from __future__ import annotations

import json
import random
from datetime import datetime, timedelta, timezone

import pytest

from datmine.dat import CATEGORIES
from datmine.ingest import (
    Cohort,
    LearnerRecord,
    LearnerTrajectories,
    RawEvent,
    build_cohort,
    day_index,
    filter_cohort,
    parse_events,
    parse_timestamp,
)
from tests.conftest import make_cohort, make_course

UTC = timezone.utc
LAUNCH = datetime(2024, 1, 6, tzinfo=UTC)


def event_line(lid="L1", ts="2024-01-06T10:00:00Z", cat="video", comp="v000"):
    return json.dumps({"learner_id": lid, "timestamp": ts,
                       "category": cat, "component_id": comp})


def raw(lid, day, cat="video", comp="v000", hour=9):
    return RawEvent(lid, LAUNCH + timedelta(days=day, hours=hour), cat, comp)


class TestParseTimestamp:
    def test_zulu_suffix(self):
        assert parse_timestamp("2024-01-06T00:00:00Z") == LAUNCH

    def test_explicit_offset_preserves_instant(self):
        ts = parse_timestamp("2024-01-06T02:00:00+02:00")
        assert ts == LAUNCH

    def test_naive_taken_as_utc(self):
        ts = parse_timestamp("2024-01-06T08:00:00")
        assert ts.tzinfo is not None
        assert ts == LAUNCH + timedelta(hours=8)

    def test_garbage_rejected(self):
        with pytest.raises(ValueError):
            parse_timestamp("not-a-date")


class TestRawEvent:
    def test_naive_timestamp_coerced_to_utc(self):
        event = RawEvent("L1", datetime(2024, 1, 7, 10, 0), "video", "v001")
        assert event.timestamp.tzinfo is UTC

    @pytest.mark.parametrize("kwargs, message", [
        (dict(learner_id=""), "learner_id"),
        (dict(category="quiz"), "unknown category"),
        (dict(component_id=""), "component_id"),
    ])
    def test_validation(self, kwargs, message):
        base = dict(learner_id="L1", timestamp=LAUNCH, category="video",
                    component_id="v000")
        base.update(kwargs)
        with pytest.raises(ValueError, match=message):
            RawEvent(**base)


class TestLearnerRecord:
    def test_defaults(self):
        record = LearnerRecord("L1")
        assert record.grade is None
        assert record.certified is False
        assert record.education_level == "unknown"
        assert record.income_tier == "unknown"

    @pytest.mark.parametrize("kwargs, message", [
        (dict(grade=1.5), "grade"),
        (dict(grade=-0.01), "grade"),
        (dict(education_level="phd"), "education"),
        (dict(income_tier="billionaire"), "income"),
        (dict(learner_id=""), "learner_id"),
    ])
    def test_validation(self, kwargs, message):
        base = dict(learner_id="L1")
        base.update(kwargs)
        with pytest.raises(ValueError, match=message):
            LearnerRecord(**base)


class TestParseEvents:
    def test_clean_stream(self):
        lines = [event_line(comp=f"v{i:03d}") for i in range(4)]
        events, report = parse_events(lines)
        assert len(events) == 4
        assert report.n_lines == 4
        assert report.n_malformed == 0
        assert events[0].component_id == "v000"

    def test_blank_lines_skipped_but_numbering_kept(self):
        lines = [event_line(), "", "   ", "{broken"]
        events, report = parse_events(lines, max_malformed_fraction=0.5)
        assert len(events) == 1
        assert report.n_lines == 2           # blanks are not counted
        assert report.n_malformed == 1
        lineno, reason = report.malformed[0]
        assert lineno == 4                   # numbered within the raw stream
        assert "JSONDecodeError" in reason or "ValueError" in reason

    @pytest.mark.parametrize("bad", [
        "[1, 2, 3]",                               # not an object
        json.dumps({"learner_id": "L1"}),          # missing keys
        event_line(ts="yesterday"),                # unparseable timestamp
        event_line(cat="quiz"),                    # unknown category
        event_line(lid=""),                        # empty id
    ])
    def test_malformed_variants_collected(self, bad):
        events, report = parse_events([event_line(), bad],
                                      max_malformed_fraction=0.5)
        assert len(events) == 1
        assert report.malformed[0][0] == 2

    def test_malformed_fraction_at_threshold_tolerated(self):
        lines = [event_line() for _ in range(9)] + ["{broken"]
        events, report = parse_events(lines, max_malformed_fraction=0.1)
        assert len(events) == 9
        assert report.n_malformed == 1

    def test_malformed_fraction_above_threshold_rejected(self):
        lines = [event_line() for _ in range(8)] + ["{broken", "{also broken"]
        with pytest.raises(ValueError, match="2 of 10 event lines"):
            parse_events(lines, max_malformed_fraction=0.1)

    def test_empty_stream(self):
        events, report = parse_events([])
        assert events == []
        assert report.n_lines == 0


class TestDayIndex:
    @pytest.fixture
    def spec(self):
        return make_course(duration_days=10)

    def test_boundaries(self, spec):
        assert day_index(LAUNCH, spec) == 0
        assert day_index(LAUNCH + timedelta(days=9, hours=23, minutes=59),
                         spec) == 9
        assert day_index(LAUNCH + timedelta(days=10), spec) is None
        assert day_index(LAUNCH - timedelta(seconds=1), spec) is None

    def test_naive_timestamp_taken_as_utc(self, spec):
        assert day_index(datetime(2024, 1, 8, 3, 0), spec) == 2

    def test_mid_course(self, spec):
        assert day_index(LAUNCH + timedelta(days=4, hours=13), spec) == 4


class TestBuildCohort:
    @pytest.fixture
    def spec(self):
        return make_course(duration_days=10, n_videos=5, n_problems=2,
                           n_forums=2)

    def test_duplicates_collapse_to_one_entry(self, spec):
        events = [raw("L1", 3, hour=8), raw("L1", 3, hour=20)]
        cohort, report = build_cohort(events, [], spec)
        assert cohort.dat("L1", "video").entries == ((3, 0),)
        assert report.n_events_in == 2
        assert report.n_events_used == 2

    def test_out_of_range_and_unknown_components_counted(self, spec):
        events = [
            raw("L1", 2),
            RawEvent("L1", LAUNCH - timedelta(days=1), "video", "v000"),
            RawEvent("L1", LAUNCH + timedelta(days=10), "video", "v000"),
            raw("L1", 4, comp="v999"),
            raw("L1", 4, cat="forum", comp="f001"),
        ]
        cohort, report = build_cohort(events, [], spec)
        assert report.n_out_of_range == 2
        assert report.n_unknown_component == 1
        assert report.n_events_used == 2
        assert cohort.dat("L1", "video").entries == ((2, 0),)
        assert cohort.dat("L1", "forum").entries == ((4, 1),)

    def test_learner_with_no_usable_event_left_out(self, spec):
        events = [raw("L1", 2),
                  RawEvent("L2", LAUNCH - timedelta(days=3), "video", "v000")]
        cohort, report = build_cohort(events, [], spec)
        assert cohort.learner_ids == ("L1",)
        assert report.n_learners == 1

    def test_metadata_join_and_defaults(self, spec):
        events = [raw("L1", 1), raw("L2", 2)]
        records = [LearnerRecord("L1", grade=0.75, certified=True),
                   LearnerRecord("L9", grade=0.5)]   # L9 never in events
        cohort, report = build_cohort(events, records, spec)
        assert cohort.record("L1").grade == 0.75
        assert cohort.record("L2").grade is None
        assert report.n_learners_without_metadata == 1
        assert "L9" not in cohort

    def test_duplicate_metadata_rejected(self, spec):
        with pytest.raises(ValueError, match="duplicate metadata"):
            build_cohort([raw("L1", 1)],
                         [LearnerRecord("L1"), LearnerRecord("L1")], spec)

    def test_every_category_present_even_when_empty(self, spec):
        cohort, _ = build_cohort([raw("L1", 1)], [], spec)
        for category in CATEGORIES:
            assert cohort.dat("L1", category) is not None
        assert cohort.dat("L1", "problem").is_empty

    def test_order_insensitive(self, spec):
        events = [raw(f"L{i % 3}", day, cat, comp)
                  for i, (day, cat, comp) in enumerate([
                      (1, "video", "v001"), (2, "video", "v000"),
                      (3, "forum", "f000"), (1, "problem", "p001"),
                      (5, "video", "v004"), (5, "video", "v004"),
                  ])]
        shuffled = events[:]
        random.Random(7).shuffle(shuffled)
        a, _ = build_cohort(events, [], spec)
        b, _ = build_cohort(shuffled, [], spec)
        assert a.learner_ids == b.learner_ids
        for learner_id in a.learner_ids:
            for category in CATEGORIES:
                assert (a.dat(learner_id, category).entries
                        == b.dat(learner_id, category).entries)


class TestCohortValidation:
    def test_key_record_mismatch(self):
        spec = make_course(duration_days=5)
        good = make_cohort(spec, {"L1": {"video": [(0, 0)]}})
        traj = good.learners["L1"]
        with pytest.raises(ValueError, match="does not match"):
            Cohort(spec, {"other": traj})

    def test_missing_category_rejected(self):
        spec = make_course(duration_days=5)
        good = make_cohort(spec, {"L1": {"video": [(0, 0)]}})
        traj = good.learners["L1"]
        partial = LearnerTrajectories(
            traj.record, {"video": traj.dats["video"]})
        with pytest.raises(ValueError, match="lacks a"):
            Cohort(spec, {"L1": partial})

    def test_sorted_ids_and_dats(self):
        spec = make_course(duration_days=5)
        cohort = make_cohort(spec, {
            "zeta": {"video": [(0, 0)]},
            "alpha": {"video": [(1, 1)]},
            "mid": {"video": [(2, 2)]},
        })
        assert cohort.learner_ids == ("alpha", "mid", "zeta")
        dats = cohort.dats("video")
        assert [d.learner_id for d in dats] == ["alpha", "mid", "zeta"]


class TestFilterCohort:
    @pytest.fixture
    def cohort(self):
        spec = make_course(duration_days=5)
        return make_cohort(spec, {
            "a": {"video": [(0, 0)], "grade": 0.9, "certified": True,
                  "education_level": "college", "income_tier": "high"},
            "b": {"video": [(1, 0)], "grade": 0.4, "certified": False,
                  "education_level": "senior_high", "income_tier": "low"},
            "c": {"video": [(2, 0)], "grade": None, "certified": False,
                  "education_level": "college", "income_tier": "low"},
        })

    def test_certified(self, cohort):
        assert filter_cohort(cohort, {"certified": True}).learner_ids == ("a",)
        assert filter_cohort(cohort, {"certified": False}).learner_ids == ("b", "c")

    def test_education_single_and_set(self, cohort):
        assert filter_cohort(
            cohort, {"education_level": "college"}).learner_ids == ("a", "c")
        got = filter_cohort(
            cohort, {"education_level": {"college", "senior_high"}})
        assert got.learner_ids == ("a", "b", "c")

    def test_grade_bounds_exclude_ungraded(self, cohort):
        assert filter_cohort(cohort, {"grade_min": 0.5}).learner_ids == ("a",)
        assert filter_cohort(cohort, {"grade_max": 0.5}).learner_ids == ("b",)

    def test_has_grade(self, cohort):
        assert filter_cohort(cohort, {"has_grade": True}).learner_ids == ("a", "b")
        assert filter_cohort(cohort, {"has_grade": False}).learner_ids == ("c",)

    def test_combined_criteria(self, cohort):
        got = filter_cohort(cohort, {"income_tier": "low", "has_grade": True})
        assert got.learner_ids == ("b",)

    def test_unknown_key_rejected(self, cohort):
        with pytest.raises(ValueError, match="unknown filter 'country'"):
            filter_cohort(cohort, {"country": "NL"})

    def test_spec_carried_over(self, cohort):
        assert filter_cohort(cohort, {}).spec is cohort.spec
