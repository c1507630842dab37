"""Generator closure: planted structure must be exactly recoverable.

The generator is the ground-truth oracle for the detectors, so these tests
close the loop the hard way: generate events, push them through the real
ingest path, run the real detectors, and demand equality with the plant.
"""

from __future__ import annotations

import pytest

from datmine.behavior import count_all
from datmine.dat import active_days
from datmine.ingest import build_cohort, day_index
from datmine.synth import (
    Archetype,
    CohortPlan,
    InfeasiblePlanError,
    generate,
    null_cohort,
)
from tests.conftest import make_course


def planted_plan(seed=5, n=120):
    return CohortPlan(n, (
        Archetype("clean", 0.3, activity_prob=0.3, videos_per_day=(1, 2)),
        Archetype("mixed", 0.4, activity_prob=0.3,
                  videos_per_day=(1, 2),
                  pattern_counts={"return_recent": (1, 4),
                                  "return_long": (0, 2),
                                  "return_skipped": (1, 3)},
                  grade_coeffs={"return_recent": 0.05}),
        Archetype("dropout", 0.3, activity_prob=0.4,
                  pattern_counts={"return_recent": (3, 6)},
                  dropout=(40, 60), forum_kernel={0: 0.5}),
    ), seed=seed)


@pytest.fixture(scope="module")
def course():
    return make_course()


@pytest.fixture(scope="module")
def synthetic(course):
    return generate(planted_plan(), course)


@pytest.fixture(scope="module")
def ingested(course, synthetic):
    cohort, report = build_cohort(synthetic.events, synthetic.records, course)
    return cohort, report


class TestClosure:
    def test_every_learner_in_cohort(self, synthetic, ingested):
        cohort, report = ingested
        assert len(cohort) == 120
        assert report.n_out_of_range == 0
        assert report.n_unknown_component == 0
        assert report.n_learners_without_metadata == 0

    def test_detector_counts_match_plant_exactly(self, synthetic, ingested):
        cohort, _ = ingested
        truth = synthetic.truth_by_id()
        for learner_id in cohort.learner_ids:
            counted = count_all(cohort.dat(learner_id, "video"))
            assert counted == dict(truth[learner_id].pattern_counts), learner_id

    def test_video_day_counts_match_truth(self, synthetic, ingested):
        cohort, _ = ingested
        for planted in synthetic.truth:
            days = active_days(cohort.dat(planted.learner_id, "video"))
            assert len(days) == planted.n_video_days

    def test_grades_and_certification_consistent(self, synthetic):
        for record, planted in zip(synthetic.records, synthetic.truth):
            assert record.learner_id == planted.learner_id
            assert record.grade == planted.grade
            assert 0.0 <= planted.grade <= 1.0
            assert record.certified == planted.certified
            assert planted.certified == (planted.grade >= 0.6)

    def test_dropout_silences_later_days(self, synthetic, course):
        truth = synthetic.truth_by_id()
        for event in synthetic.events:
            cutoff = truth[event.learner_id].dropout_day
            if cutoff is not None:
                assert day_index(event.timestamp, course) < cutoff

    def test_dropout_day_only_for_dropout_archetype(self, synthetic):
        for planted in synthetic.truth:
            if planted.archetype == "dropout":
                assert planted.dropout_day is not None
                assert 40 <= planted.dropout_day <= 60
            else:
                assert planted.dropout_day is None

    def test_group_y_truth_matches_trajectories(self, synthetic, ingested,
                                                course):
        cohort, _ = ingested
        duration = course.duration_days
        for planted in synthetic.truth:
            video = set(active_days(cohort.dat(planted.learner_id, "video")))
            forum = set(active_days(cohort.dat(planted.learner_id, "forum")))
            derived = any(
                t in forum
                for day in video
                for t in range(day, min(day + 2, duration - 1) + 1)
            )
            assert derived == planted.group_y, planted.learner_id


class TestExactGradeModel:
    def test_noise_free_grade_is_linear_in_counts(self, course):
        plan = CohortPlan(40, (
            Archetype("a", 1.0, activity_prob=0.3, videos_per_day=(1, 2),
                      pattern_counts={"return_recent": (0, 5)},
                      grade_base=0.3,
                      grade_coeffs={"return_recent": 0.1},
                      grade_noise=0.0),
        ), seed=2, certified_threshold=0.55)
        cohort = generate(plan, course)
        for planted in cohort.truth:
            k = planted.pattern_counts["return_recent"]
            expected = min(1.0, max(0.0, 0.3 + 0.1 * k))
            assert planted.grade == expected
            assert planted.certified == (expected >= 0.55)


class TestDeterminism:
    def test_same_seed_identical_output(self, course):
        a = generate(planted_plan(), course)
        b = generate(planted_plan(), course)
        assert a.events == b.events
        assert a.records == b.records
        assert a.truth == b.truth

    def test_different_seed_differs(self, course):
        a = generate(planted_plan(seed=5, n=30), course)
        b = generate(planted_plan(seed=6, n=30), course)
        assert a.events != b.events

    def test_events_emitted_in_sorted_order(self, synthetic):
        keys = [(e.timestamp, e.learner_id, e.category, e.component_id)
                for e in synthetic.events]
        assert keys == sorted(keys)


class TestDuplicateEvents:
    def test_duplicates_change_events_not_trajectories(self, course):
        base_plan = planted_plan(seed=9, n=25)
        plain = generate(base_plan, course)
        noisy = generate(CohortPlan(25, base_plan.archetypes, seed=9,
                                    duplicate_event_prob=1.0), course)
        assert len(noisy.events) == 2 * len(plain.events)
        assert noisy.truth == plain.truth
        cohort_a, _ = build_cohort(plain.events, plain.records, course)
        cohort_b, _ = build_cohort(noisy.events, noisy.records, course)
        assert cohort_a.learner_ids == cohort_b.learner_ids
        for learner_id in cohort_a.learner_ids:
            for category in ("video", "problem", "forum"):
                assert (cohort_a.dat(learner_id, category).entries
                        == cohort_b.dat(learner_id, category).entries)


class TestArchetypeDistribution:
    def test_proportions_roughly_honored(self, course):
        plan = CohortPlan(400, (
            Archetype("half_a", 0.5, activity_prob=0.2),
            Archetype("half_b", 0.5, activity_prob=0.2),
        ), seed=1)
        cohort = generate(plan, course)
        counts = {"half_a": 0, "half_b": 0}
        for planted in cohort.truth:
            counts[planted.archetype] += 1
        assert counts["half_a"] + counts["half_b"] == 400
        assert 140 < counts["half_a"] < 260


class TestInfeasiblePlans:
    def test_more_pattern_days_than_course(self):
        spec = make_course(duration_days=3, n_videos=44)
        plan = CohortPlan(5, (
            Archetype("greedy", 1.0,
                      pattern_counts={"return_recent": (5, 5)}),
        ), seed=0)
        with pytest.raises(InfeasiblePlanError, match="walk days"):
            generate(plan, spec)

    def test_catalog_too_small_for_walk(self):
        spec = make_course(duration_days=40, n_videos=4)
        plan = CohortPlan(5, (
            Archetype("wide", 1.0, activity_prob=1.0),
        ), seed=0)
        with pytest.raises(InfeasiblePlanError, match="catalog"):
            generate(plan, spec)

    def test_infeasible_is_a_value_error(self):
        assert issubclass(InfeasiblePlanError, ValueError)


class TestPlanValidation:
    def test_proportions_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum"):
            CohortPlan(10, (Archetype("a", 0.5), Archetype("b", 0.4)))

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError, match="unique"):
            CohortPlan(10, (Archetype("a", 0.5), Archetype("a", 0.5)))

    def test_needs_learners_and_archetypes(self):
        with pytest.raises(ValueError, match="at least one learner"):
            CohortPlan(0, (Archetype("a", 1.0),))
        with pytest.raises(ValueError, match="at least one archetype"):
            CohortPlan(10, ())

    @pytest.mark.parametrize("kwargs, message", [
        (dict(proportion=0.0), "proportion"),
        (dict(proportion=1.2), "proportion"),
        (dict(activity_prob=0.0), "activity_prob"),
        (dict(videos_per_day=(0, 2)), "videos_per_day"),
        (dict(videos_per_day=(3, 2)), "videos_per_day"),
        (dict(pattern_counts={"binge": (1, 2)}), "unknown pattern"),
        (dict(pattern_counts={"return_long": (4, 2)}), "bad count range"),
    ])
    def test_archetype_validation(self, kwargs, message):
        base = dict(name="a", proportion=1.0)
        base.update(kwargs)
        with pytest.raises(ValueError, match=message):
            Archetype(**base)


class TestNullCohort:
    def test_deterministic(self, course):
        a = null_cohort(30, course, seed=4)
        b = null_cohort(30, course, seed=4)
        assert a.learner_ids == b.learner_ids
        for learner_id in a.learner_ids:
            for category in ("video", "forum"):
                assert (a.dat(learner_id, category).entries
                        == b.dat(learner_id, category).entries)
            assert a.record(learner_id) == b.record(learner_id)

    def test_shape_and_metadata(self, course):
        cohort = null_cohort(25, course, seed=7, certified_threshold=0.5)
        assert len(cohort) == 25
        assert all(i.startswith("N") for i in cohort.learner_ids)
        for learner_id in cohort.learner_ids:
            record = cohort.record(learner_id)
            assert 0.0 <= record.grade <= 1.0
            assert record.certified == (record.grade >= 0.5)
            assert cohort.dat(learner_id, "problem").is_empty

    def test_same_day_kernel_forces_forum_on_video_days(self, course):
        cohort = null_cohort(20, course, seed=3, forum_kernel={0: 1.0})
        for learner_id in cohort.learner_ids:
            video = set(active_days(cohort.dat(learner_id, "video")))
            forum = set(active_days(cohort.dat(learner_id, "forum")))
            assert video <= forum

    def test_needs_a_learner(self, course):
        with pytest.raises(ValueError, match="at least one learner"):
            null_cohort(0, course, seed=0)
