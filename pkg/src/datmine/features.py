"""Handcrafted summary features of a video trajectory.

Ten numbers describe when a learner was active and how they moved through
the catalog.  Day intervals are successive differences of the sorted active
days; video intervals are successive index differences of the unique videos
in first-access order (ties within a day resolve by ascending index), so a
learner moving backward through the catalog produces negative gaps.  All
variances are population variances, and statistics over an empty interval
list are 0, so every non-empty trajectory maps to a finite vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dat import Dat
from .embedding import EmbeddingMatrix

FEATURE_NAMES = (
    "n_unique_videos",
    "n_days",
    "ave_day_intervals",
    "var_days",
    "ave_video_intervals",
    "var_videos",
    "rate_videos_repeats",
    "n_videos_per_day",
    "var_day_intervals",
    "var_video_intervals",
)


@dataclass(frozen=True)
class FeatureVector:
    """The ten features of one trajectory, ordered as FEATURE_NAMES."""

    learner_id: str
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(FEATURE_NAMES),):
            raise ValueError(f"expected {len(FEATURE_NAMES)} features, got {values.shape}")
        object.__setattr__(self, "values", values)

    def as_dict(self) -> dict[str, float]:
        return {name: float(v) for name, v in zip(FEATURE_NAMES, self.values)}


def _mean_or_zero(values: np.ndarray) -> float:
    return float(values.mean()) if values.size else 0.0


def _pvar_or_zero(values: np.ndarray) -> float:
    return float(np.var(values)) if values.size else 0.0


def extract_features(dat: Dat) -> FeatureVector:
    """Compute the ten summary features for one non-empty trajectory."""
    if dat.is_empty:
        raise ValueError(f"cannot featurize an empty trajectory (learner {dat.learner_id!r})")

    days_list: list[int] = []
    first_order: list[int] = []
    days_per_video: dict[int, int] = {}
    seen_days: set[int] = set()
    for day, comp in dat.entries:
        if day not in seen_days:
            seen_days.add(day)
            days_list.append(day)
        if comp not in days_per_video:
            first_order.append(comp)
            days_per_video[comp] = 1
        else:
            days_per_video[comp] += 1
    days = np.asarray(sorted(days_list), dtype=np.float64)
    videos = np.asarray(first_order, dtype=np.float64)

    day_intervals = np.diff(days)
    video_intervals = np.diff(videos)
    n_unique = len(first_order)
    n_days = len(days_list)
    n_repeats = sum(1 for n in days_per_video.values() if n > 1)

    values = np.array(
        [
            float(n_unique),
            float(n_days),
            _mean_or_zero(day_intervals),
            _pvar_or_zero(days),
            _mean_or_zero(video_intervals),
            _pvar_or_zero(videos),
            n_repeats / n_unique,
            len(dat.entries) / n_days,
            _pvar_or_zero(day_intervals),
            _pvar_or_zero(video_intervals),
        ],
        dtype=np.float64,
    )
    return FeatureVector(dat.learner_id, values)


def standardize(values: np.ndarray) -> np.ndarray:
    """Z-score each column; zero-variance columns become all zeros."""
    matrix = np.asarray(values, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if matrix.shape[0] < 2:
        raise ValueError("standardization needs at least two rows")
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)
    out = np.zeros_like(matrix)
    nz = std > 0.0
    out[:, nz] = (matrix[:, nz] - mean[nz]) / std[nz]
    return out


def feature_matrix(dats: Sequence[Dat]) -> EmbeddingMatrix:
    """Raw (unstandardized) feature rows for a set of trajectories."""
    if not dats:
        raise ValueError("no trajectories to featurize")
    vecs = [extract_features(d) for d in dats]
    values = np.stack([v.values for v in vecs])
    return EmbeddingMatrix(tuple(v.learner_id for v in vecs), values,
                           pipeline="features", seed=None)


def feature_pipeline(dats: Sequence[Dat]) -> EmbeddingMatrix:
    """Extract and standardize features; the embedding route used downstream."""
    raw = feature_matrix(dats)
    return EmbeddingMatrix(raw.learner_ids, standardize(raw.values),
                           pipeline="features", seed=None)
