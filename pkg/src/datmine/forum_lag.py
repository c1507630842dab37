"""Does watching videos drive forum visits in the days right after?

The estimand is the probability that a learner is forum-active n days after
a video-active day, estimated by pooling all (learner, video day) pairs of
learners who used both videos and forums: p(n) = total video days followed
at offset n by forum activity / total video days.  Days whose offset target
falls outside the course window are excluded from both numerator and
denominator, so edge effects cannot bias the ratio.  The baseline for
comparison is the unconditional fraction of forum-active learner-days.

Two tests probe the effect: a two-sample KS test comparing per-learner
conditional frequencies against per-learner baseline frequencies, and a
grade contrast between learners who do and do not show video-then-forum
behavior within a fixed window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dat import active_days
from .ingest import Cohort
from .stats import TestResult, ks_two_sample, proportion_ci, welch_t

CI_LEVEL = 0.99
DEFAULT_WINDOW_DAYS = 2


def _restricted_ids(cohort: Cohort) -> list[str]:
    """Learners with both video and forum activity, in id order."""
    return [
        learner_id
        for learner_id in cohort.learner_ids
        if not cohort.dat(learner_id, "video").is_empty
        and not cohort.dat(learner_id, "forum").is_empty
    ]


@dataclass(frozen=True)
class ConditionalEstimate:
    """Pooled estimate of forum activity at one offset from video days."""

    offset: int
    p_hat: float | None
    total_v_days: int
    total_v_f_days: int
    n_learners: int

    @property
    def defined(self) -> bool:
        return self.p_hat is not None

    def ci(self, level: float = CI_LEVEL) -> tuple[float, float]:
        if self.p_hat is None:
            raise ValueError("confidence interval of an undefined estimate")
        return proportion_ci(self.total_v_f_days, self.total_v_days, level)


def estimate_conditional(cohort: Cohort, offset: int) -> ConditionalEstimate:
    """P(forum-active at day d + offset | video-active at day d), pooled.

    Only learners with both video and forum activity contribute.  Video days
    whose offset target lies outside the course are skipped entirely; if no
    valid video day remains the estimate is undefined (p_hat None).
    """
    duration = cohort.spec.duration_days
    ids = _restricted_ids(cohort)
    total_v = 0
    total_vf = 0
    for learner_id in ids:
        video_days = active_days(cohort.dat(learner_id, "video"))
        forum_days = set(active_days(cohort.dat(learner_id, "forum")))
        for day in video_days:
            target = day + offset
            if 0 <= target < duration:
                total_v += 1
                if target in forum_days:
                    total_vf += 1
    p_hat = total_vf / total_v if total_v > 0 else None
    return ConditionalEstimate(offset, p_hat, total_v, total_vf, len(ids))


@dataclass(frozen=True)
class BaselineEstimate:
    """Unconditional forum-activity rate over learner-days."""

    p: float
    n_samples: int
    n_learners: int


def estimate_baseline(cohort: Cohort) -> BaselineEstimate:
    """Fraction of forum-active (learner, day) cells in the restricted group."""
    duration = cohort.spec.duration_days
    ids = _restricted_ids(cohort)
    if not ids:
        raise ValueError("no learners with both video and forum activity")
    forum_days = sum(len(active_days(cohort.dat(i, "forum"))) for i in ids)
    n_samples = len(ids) * duration
    return BaselineEstimate(forum_days / n_samples, n_samples, len(ids))


@dataclass(frozen=True)
class OffsetSeries:
    """Conditional estimates over a range of offsets plus the baseline."""

    offsets: tuple[int, ...]
    estimates: tuple[ConditionalEstimate, ...]
    baseline: BaselineEstimate
    ci_level: float

    def rows(self) -> list[tuple[int, float | None, float | None, float | None, float]]:
        """(offset, p_cond, ci_lo, ci_hi, p_base) per offset; None if undefined."""
        out = []
        for est in self.estimates:
            if est.defined:
                lo, hi = est.ci(self.ci_level)
                out.append((est.offset, est.p_hat, lo, hi, self.baseline.p))
            else:
                out.append((est.offset, None, None, None, self.baseline.p))
        return out


def offset_sweep(cohort: Cohort, n_min: int, n_max: int,
                 ci_level: float = CI_LEVEL) -> OffsetSeries:
    """Conditional estimates for every offset in [n_min, n_max]."""
    if n_min > n_max:
        raise ValueError(f"empty offset range [{n_min}, {n_max}]")
    baseline = estimate_baseline(cohort)
    offsets = tuple(range(n_min, n_max + 1))
    estimates = tuple(estimate_conditional(cohort, n) for n in offsets)
    return OffsetSeries(offsets, estimates, baseline, ci_level)


def dependence_test(cohort: Cohort, offset: int) -> TestResult:
    """KS test: per-learner conditional frequencies vs baseline frequencies.

    For each learner in the restricted group, the conditional frequency is
    the fraction of their valid video days with forum activity at the given
    offset (learners with no valid video day drop out of that sample), and
    the baseline frequency is their forum-active days over the course
    duration.  Identical behavior yields D = 0, p = 1.
    """
    duration = cohort.spec.duration_days
    ids = _restricted_ids(cohort)
    cond: list[float] = []
    base: list[float] = []
    for learner_id in ids:
        video_days = active_days(cohort.dat(learner_id, "video"))
        forum_set = set(active_days(cohort.dat(learner_id, "forum")))
        v = 0
        vf = 0
        for day in video_days:
            target = day + offset
            if 0 <= target < duration:
                v += 1
                if target in forum_set:
                    vf += 1
        if v > 0:
            cond.append(vf / v)
        base.append(len(forum_set) / duration)
    if len(cond) < 2 or len(base) < 2:
        raise ValueError(
            f"dependence test needs at least two learners per sample, "
            f"got {len(cond)} conditional and {len(base)} baseline"
        )
    return ks_two_sample(np.asarray(cond), np.asarray(base))


@dataclass(frozen=True)
class GroupGradeResult:
    """Grade contrast between learners with and without the lag behavior."""

    window_days: int
    n_group_y: int
    n_group_n: int
    mean_y: float
    mean_n: float
    statistic: float
    df: float
    p_value: float


def group_grade_test(cohort: Cohort,
                     window_days: int = DEFAULT_WINDOW_DAYS) -> GroupGradeResult:
    """Two-tailed Welch test of grades: lag behavior present vs absent.

    A learner belongs to group Y when at least one of their video days is
    followed by forum activity within window_days (the video day itself
    counts).  Everyone else with a grade, including learners who never
    touched videos or forums, forms group N.  Any certification or
    demographic filtering is the caller's job, upstream of this test.
    """
    if window_days < 0:
        raise ValueError("window_days must be non-negative")
    duration = cohort.spec.duration_days
    grades_y: list[float] = []
    grades_n: list[float] = []
    for learner_id in cohort.learner_ids:
        record = cohort.record(learner_id)
        if record.grade is None:
            continue
        video_days = active_days(cohort.dat(learner_id, "video"))
        forum_set = set(active_days(cohort.dat(learner_id, "forum")))
        in_y = False
        for day in video_days:
            stop = min(day + window_days, duration - 1)
            if any(t in forum_set for t in range(day, stop + 1)):
                in_y = True
                break
        (grades_y if in_y else grades_n).append(record.grade)
    if len(grades_y) < 2 or len(grades_n) < 2:
        raise ValueError(
            f"grade contrast needs at least two learners per group, "
            f"got {len(grades_y)} with and {len(grades_n)} without the behavior"
        )
    res = welch_t(np.asarray(grades_y), np.asarray(grades_n), tail="two")
    return GroupGradeResult(
        window_days, len(grades_y), len(grades_n),
        float(np.mean(grades_y)), float(np.mean(grades_n)),
        res.statistic, res.df if res.df is not None else float("nan"), res.p_value,
    )
