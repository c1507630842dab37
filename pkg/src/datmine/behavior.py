"""Repeat-viewing behavior patterns and their relation to grades.

Three patterns are counted on a learner's video trajectory, all at day
resolution (multiple accesses of one video within a day collapse to one):

* ``return_recent``: on the transition between two consecutive active days,
  the learner opens the next day with exactly the video they closed the
  previous day on; formally min(components of next day) equals
  max(components of previous day).  One count per qualifying day pair.
* ``return_long``: a video is accessed again after at least one intervening
  active day on which that video was not touched.  One count per qualifying
  re-access.
* ``return_skipped``: a video is accessed for the first time although some
  higher-indexed video was already accessed on an earlier day, i.e. the
  learner goes back to fill a gap they skipped.  One count per qualifying
  first access.

``cutoff_search`` then looks for the frequency threshold that best separates
grades: for every candidate cutoff c the population splits into learners with
pattern count < c and >= c, a one-tailed Welch test asks whether the frequent
group scores higher, and the cutoff with the smallest p-value wins.  The full
scan is returned as an audit trail with a Bonferroni-adjusted column.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dat import CourseSpec, Dat, day_component_map
from .stats import welch_t

PATTERNS = ("return_recent", "return_long", "return_skipped")


def count_return_recent(dat: Dat) -> int:
    by_day = day_component_map(dat)
    days = sorted(by_day)
    count = 0
    for prev, nxt in zip(days, days[1:]):
        if min(by_day[nxt]) == max(by_day[prev]):
            count += 1
    return count


def count_return_long(dat: Dat) -> int:
    by_day = day_component_map(dat)
    days = sorted(by_day)
    video_days: dict[int, list[int]] = {}
    for day in days:
        for comp in by_day[day]:
            video_days.setdefault(comp, []).append(day)
    count = 0
    for accesses in video_days.values():
        for prev, cur in zip(accesses, accesses[1:]):
            # any active day strictly between consecutive accesses of this
            # video necessarily lacks it
            idx = bisect.bisect_right(days, prev)
            if idx < len(days) and days[idx] < cur:
                count += 1
    return count


def count_return_skipped(dat: Dat) -> int:
    by_day = day_component_map(dat)
    first_day: dict[int, int] = {}
    for day, comp in dat.entries:
        if comp not in first_day:
            first_day[comp] = day
    count = 0
    running_max = -1
    for day in sorted(by_day):
        comps = by_day[day]
        for comp in comps:
            if first_day[comp] == day and running_max > comp:
                count += 1
        day_max = max(comps)
        if day_max > running_max:
            running_max = day_max
    return count


_COUNTERS = {
    "return_recent": count_return_recent,
    "return_long": count_return_long,
    "return_skipped": count_return_skipped,
}


def count_pattern(dat: Dat, pattern: str) -> int:
    """Count one pattern on one trajectory."""
    try:
        counter = _COUNTERS[pattern]
    except KeyError:
        raise ValueError(f"unknown pattern {pattern!r}, expected one of {PATTERNS}") from None
    return counter(dat)


def count_all(dat: Dat) -> dict[str, int]:
    """All three pattern counts for one trajectory."""
    return {name: counter(dat) for name, counter in _COUNTERS.items()}


@dataclass(frozen=True)
class PatternFrequency:
    """One learner's count of one pattern."""

    learner_id: str
    pattern: str
    count: int


def mine_patterns(video_dats: Iterable[Dat]) -> list[PatternFrequency]:
    """Pattern counts for every trajectory, three rows per learner."""
    rows: list[PatternFrequency] = []
    for dat in video_dats:
        for pattern, count in count_all(dat).items():
            rows.append(PatternFrequency(dat.learner_id, pattern, count))
    return rows


@dataclass(frozen=True)
class CutoffRow:
    """One candidate threshold in a cutoff scan."""

    cutoff: int
    n_below: int
    n_above: int
    valid: bool
    statistic: float | None = None
    df: float | None = None
    p_value: float | None = None
    log10_p: float | None = None
    p_bonferroni: float | None = None
    note: str = ""


@dataclass(frozen=True)
class CutoffResult:
    """Best grade-separating frequency threshold plus the full scan."""

    pattern: str
    degenerate: bool
    cutoff: int | None
    p_value: float | None
    log10_p: float | None
    p_bonferroni: float | None
    n_below: int
    n_above: int
    n_tests: int
    rows: tuple[CutoffRow, ...]
    reason: str = ""


def cutoff_search(
    counts: Sequence[int], grades: Sequence[float], pattern: str = ""
) -> CutoffResult:
    """Scan thresholds 1..max(counts)-1 for the best grade split.

    Candidate c partitions learners into count < c and count >= c; a
    one-tailed Welch test (frequent group scores higher) is run whenever both
    sides have at least two members.  The winning cutoff minimizes the
    p-value, compared in log space so that heavily underflowing p-values
    still order correctly; exact ties go to the smaller cutoff.  When no
    candidate yields a valid split the result is marked degenerate.
    """
    counts = [int(c) for c in counts]
    grades_arr = np.asarray(grades, dtype=np.float64)
    if len(counts) != grades_arr.shape[0]:
        raise ValueError("counts and grades must align")
    if len(counts) == 0:
        raise ValueError("cutoff search needs at least one learner")
    if any(c < 0 for c in counts):
        raise ValueError("pattern counts must be non-negative")
    if not np.all(np.isfinite(grades_arr)):
        raise ValueError("grades must be finite")

    counts_arr = np.asarray(counts, dtype=np.int64)
    max_freq = int(counts_arr.max())
    rows: list[CutoffRow] = []
    for cutoff in range(1, max_freq):
        below = grades_arr[counts_arr < cutoff]
        above = grades_arr[counts_arr >= cutoff]
        if below.size < 2 or above.size < 2:
            rows.append(
                CutoffRow(cutoff, below.size, above.size, valid=False,
                          note="group smaller than 2")
            )
            continue
        res = welch_t(above, below, tail="right")
        rows.append(
            CutoffRow(cutoff, int(below.size), int(above.size), valid=True,
                      statistic=res.statistic, df=res.df,
                      p_value=res.p_value, log10_p=res.log10_p)
        )

    n_tests = sum(1 for r in rows if r.valid)
    if n_tests:
        adjusted = []
        for r in rows:
            if r.valid:
                bonf = min(1.0, r.p_value * n_tests)
                adjusted.append(
                    CutoffRow(r.cutoff, r.n_below, r.n_above, True, r.statistic,
                              r.df, r.p_value, r.log10_p, p_bonferroni=bonf)
                )
            else:
                adjusted.append(r)
        rows = adjusted

    valid_rows = [r for r in rows if r.valid]
    if not valid_rows:
        reason = "no pattern occurrences" if max_freq < 1 else "degenerate count distribution"
        return CutoffResult(pattern, True, None, None, None, None, 0, 0, 0,
                            tuple(rows), reason)

    best = min(valid_rows, key=lambda r: (r.log10_p, r.cutoff))
    return CutoffResult(
        pattern, False, best.cutoff, best.p_value, best.log10_p,
        best.p_bonferroni, best.n_below, best.n_above, n_tests, tuple(rows)
    )


@dataclass(frozen=True)
class ReplayComparison:
    """Replay-distribution fluctuation contrast between two learner groups.

    ``status`` is "ok" when the test ran, "no_replays" when a group has no
    repeat viewing at all, "insufficient_data" when the catalog is too small
    to compare fluctuations (fewer than three videos).
    """

    status: str
    p_value: float | None
    statistic: float | None
    df: float | None
    series_a: np.ndarray
    series_b: np.ndarray
    fluctuation_mean_a: float | None
    fluctuation_mean_b: float | None


def _replay_series(dats: Iterable[Dat], n_videos: int) -> np.ndarray:
    series = np.zeros(n_videos, dtype=np.float64)
    for dat in dats:
        video_days: dict[int, int] = {}
        for _, comp in dat.entries:
            if comp >= n_videos:
                raise ValueError(f"component {comp} outside catalog of {n_videos}")
            video_days[comp] = video_days.get(comp, 0) + 1
        for comp, n_days in video_days.items():
            if n_days > 1:
                series[comp] += n_days - 1
    return series


def replay_fluctuation_compare(
    group_a: Iterable[Dat], group_b: Iterable[Dat], spec: CourseSpec
) -> ReplayComparison:
    """Compare how unevenly two groups spread their repeat viewing.

    Per group, each video's replay count (extra distinct viewing days beyond
    the first) is normalized to a share of the group's replays; the absolute
    first differences of that curve measure fluctuation from one video to the
    next.  A one-tailed Welch test asks whether group A fluctuates more.
    """
    n_videos = spec.n_components("video")
    series_a = _replay_series(group_a, n_videos)
    series_b = _replay_series(group_b, n_videos)
    if n_videos < 3:
        return ReplayComparison("insufficient_data", None, None, None,
                                series_a, series_b, None, None)
    if series_a.sum() == 0.0 or series_b.sum() == 0.0:
        return ReplayComparison("no_replays", None, None, None,
                                series_a, series_b, None, None)
    frac_a = series_a / series_a.sum()
    frac_b = series_b / series_b.sum()
    fluct_a = np.abs(np.diff(frac_a))
    fluct_b = np.abs(np.diff(frac_b))
    res = welch_t(fluct_a, fluct_b, tail="right")
    return ReplayComparison("ok", res.p_value, res.statistic, res.df,
                            series_a, series_b,
                            float(fluct_a.mean()), float(fluct_b.mean()))
