"""Core access-trajectory types.

A trajectory records which ordered course components a learner touched on
which course days, as a sparse sorted list of (day, component) pairs.  Days
and component indices are 0-based throughout; day is the atomic time unit, so
within-day ordering is never represented.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Sequence

import numpy as np

CATEGORIES = ("video", "problem", "forum")


class BoundsError(ValueError):
    """An access lies outside the course duration or component catalog."""


@dataclass(frozen=True)
class CourseSpec:
    """Course timeline and per-category ordered component catalogs."""

    launch: datetime
    duration_days: int
    catalogs: dict[str, tuple[str, ...]]

    def __post_init__(self):
        if self.launch.tzinfo is None:
            object.__setattr__(self, "launch", self.launch.replace(tzinfo=timezone.utc))
        if self.duration_days < 1:
            raise ValueError("duration_days must be >= 1")
        for cat, ids in self.catalogs.items():
            if cat not in CATEGORIES:
                raise ValueError(f"unknown category {cat!r}")
            if not ids:
                raise ValueError(f"catalog for {cat!r} is empty")
            if len(set(ids)) != len(ids):
                raise ValueError(f"duplicate component ids in {cat!r} catalog")

    def n_components(self, category: str) -> int:
        return len(self.catalogs[category])

    def component_index(self, category: str) -> dict[str, int]:
        return {cid: i for i, cid in enumerate(self.catalogs[category])}


@dataclass(frozen=True)
class Dat:
    """Sparse binary access trajectory of one learner for one category.

    ``entries`` is sorted lexicographically by (day, component) and free of
    duplicates; construction enforces both.
    """

    learner_id: str
    category: str
    entries: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        ordered = tuple(sorted(set(self.entries)))
        if ordered != self.entries:
            object.__setattr__(self, "entries", ordered)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def is_empty(self) -> bool:
        return not self.entries


@dataclass(frozen=True)
class DenseDat:
    """Dense duration_days x n_components binary matrix view of a Dat."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=np.uint8))


def dat_from_accesses(
    accesses: Iterable[tuple[int, int]],
    spec: CourseSpec,
    category: str,
    learner_id: str = "",
) -> Dat:
    """Build a Dat from raw (day, component) pairs.

    Repeated accesses of the same cell collapse to a single entry (the
    trajectory is binary).  Raises :class:`BoundsError` naming the first pair
    that falls outside the course duration or catalog.
    """
    n_comp = spec.n_components(category)
    cleaned = set()
    for day, comp in accesses:
        if not (0 <= day < spec.duration_days) or not (0 <= comp < n_comp):
            raise BoundsError(
                f"access ({day}, {comp}) out of bounds for "
                f"{spec.duration_days} days x {n_comp} {category} components"
            )
        cleaned.add((int(day), int(comp)))
    return Dat(learner_id, category, tuple(sorted(cleaned)))


def to_dense(dat: Dat, spec: CourseSpec) -> DenseDat:
    """Expand to the full binary matrix (day rows, component columns)."""
    matrix = np.zeros((spec.duration_days, spec.n_components(dat.category)), dtype=np.uint8)
    for day, comp in dat.entries:
        matrix[day, comp] = 1
    return DenseDat(matrix)


def from_dense(dense: DenseDat, category: str, learner_id: str = "") -> Dat:
    days, comps = np.nonzero(dense.matrix)
    entries = tuple(sorted(zip(days.tolist(), comps.tolist())))
    return Dat(learner_id, category, entries)


def active_days(dat: Dat) -> list[int]:
    """Strictly increasing list of days with at least one access."""
    return sorted({day for day, _ in dat.entries})


def components_on_day(dat: Dat, day: int) -> list[int]:
    """Sorted distinct components accessed on ``day`` (empty if inactive)."""
    return sorted({comp for d, comp in dat.entries if d == day})


def day_component_map(dat: Dat) -> dict[int, list[int]]:
    """All active days mapped to their sorted component lists, in one pass."""
    by_day: dict[int, list[int]] = {}
    for day, comp in dat.entries:
        by_day.setdefault(day, []).append(comp)
    return by_day
