"""Independent brute-force oracles.

Everything here is re-derived from the written definitions using the most
literal enumeration available, trading speed for transparency, so the
library under test cannot be graded against its own arithmetic.
"""

from __future__ import annotations

import math
from collections import Counter


def day_sets(entries) -> dict[int, set[int]]:
    out: dict[int, set[int]] = {}
    for day, comp in entries:
        out.setdefault(day, set()).add(comp)
    return out


def brute_return_recent(entries) -> int:
    """Consecutive active-day pairs where the next day opens exactly on the
    previous day's furthest component."""
    by_day = day_sets(entries)
    days = sorted(by_day)
    return sum(
        1 for a, b in zip(days, days[1:])
        if sorted(by_day[b])[0] == sorted(by_day[a])[-1]
    )


def brute_return_long(entries) -> int:
    """Re-accesses of a video separated from the previous access of that
    video by at least one other active day."""
    by_day = day_sets(entries)
    active = sorted(by_day)
    videos: dict[int, list[int]] = {}
    for day in active:
        for comp in by_day[day]:
            videos.setdefault(comp, []).append(day)
    hits = 0
    for days in videos.values():
        for d1, d2 in zip(days, days[1:]):
            if any(d1 < a < d2 for a in active):
                hits += 1
    return hits


def brute_return_skipped(entries) -> int:
    """First accesses of a video that lies behind material already seen:
    some strictly earlier day touched a strictly later component."""
    first: dict[int, int] = {}
    for day, comp in sorted(entries):
        if comp not in first:
            first[comp] = day
    hits = 0
    for comp, day in first.items():
        if any(d < day and c > comp for d, c in entries):
            hits += 1
    return hits


def brute_dtw(a, b) -> float:
    """Minimum mean per-step distance over every monotone alignment.

    Enumerates all warping paths from (0, 0) to (len(a)-1, len(b)-1) with
    steps (+1, 0), (0, +1), (+1, +1); among paths of minimal total cost the
    shortest wins, and the result is that cost divided by the path length.
    Exponential, so only usable for short sequences.
    """

    def dist(p, q):
        return math.sqrt((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2)

    n, m = len(a), len(b)
    best: list[tuple[float, int]] = [(math.inf, 0)]

    def walk(i, j, cost, length):
        cost = cost + dist(a[i], b[j])
        length += 1
        if i == n - 1 and j == m - 1:
            best[0] = min(best[0], (cost, length))
            return
        if i + 1 < n:
            walk(i + 1, j, cost, length)
        if j + 1 < m:
            walk(i, j + 1, cost, length)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, cost, length)

    walk(0, 0, 0.0, 0)
    cost, length = best[0]
    return cost / length


def purity(true_labels, cluster_labels) -> float:
    """Fraction of points whose cluster's majority true label matches."""
    clusters: dict[object, list] = {}
    for t, c in zip(true_labels, cluster_labels):
        clusters.setdefault(c, []).append(t)
    correct = sum(Counter(members).most_common(1)[0][1]
                  for members in clusters.values())
    return correct / len(true_labels)
