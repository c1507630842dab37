"""Trajectory similarity pipeline: DTW distances plus classical MDS.

A trajectory is rendered as the sequence of its (day, component) accesses in
lexicographic order, both axes scaled to [0, 1] so that courses of different
lengths and catalog sizes are comparable.  Pairwise similarity is
length-normalized dynamic time warping with Euclidean point cost; the
resulting distance matrix is embedded into coordinates by classical
(Torgerson) multidimensional scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .dat import CourseSpec, Dat
from .embedding import DistanceMatrix, EmbeddingMatrix

MDS_DIMS = 10


@dataclass(frozen=True)
class TrajectorySeries:
    """A trajectory as an ordered point sequence on the unit square."""

    learner_id: str
    category: str
    points: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
            raise ValueError("points must be a non-empty (len, 2) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


def dat_to_series(dat: Dat, spec: CourseSpec) -> TrajectorySeries:
    """Convert a trajectory to its normalized point sequence.

    Entries are taken in (day, component) lexicographic order.  Days map to
    day / (duration - 1) and components to index / (n_components - 1); a
    single-day course or single-component catalog collapses that axis to 0.
    """
    if dat.is_empty:
        raise ValueError(f"cannot build a series from an empty trajectory "
                         f"(learner {dat.learner_id!r})")
    n_comp = spec.n_components(dat.category)
    day_div = float(spec.duration_days - 1) if spec.duration_days > 1 else 1.0
    comp_div = float(n_comp - 1) if n_comp > 1 else 1.0
    pts = np.empty((len(dat.entries), 2), dtype=np.float64)
    for i, (day, comp) in enumerate(dat.entries):
        if day >= spec.duration_days or comp >= n_comp:
            raise ValueError(f"entry {(day, comp)} outside course bounds")
        pts[i, 0] = day / day_div
        pts[i, 1] = comp / comp_div
    return TrajectorySeries(dat.learner_id, dat.category, pts)


def dtw_distance(a: TrajectorySeries, b: TrajectorySeries) -> float:
    """Normalized DTW distance between two trajectory series."""
    return kernels.dtw_normalized(a.points, b.points)


def distance_matrix(series: Sequence[TrajectorySeries]) -> DistanceMatrix:
    """All-pairs normalized DTW distances for two or more series."""
    if len(series) < 2:
        raise ValueError("distance matrix needs at least two series")
    ids = tuple(s.learner_id for s in series)
    condensed = kernels.pairwise_dtw([s.points for s in series])
    return DistanceMatrix(ids, condensed)


def cohort_series(
    dats: Iterable[Dat], spec: CourseSpec
) -> tuple[list[TrajectorySeries], list[str]]:
    """Series for every non-empty trajectory; returns (series, skipped ids)."""
    series: list[TrajectorySeries] = []
    skipped: list[str] = []
    for dat in dats:
        if dat.is_empty:
            skipped.append(dat.learner_id)
        else:
            series.append(dat_to_series(dat, spec))
    return series, skipped


def classical_mds(dm: DistanceMatrix, k: int = MDS_DIMS) -> EmbeddingMatrix:
    """Embed a distance matrix into k dimensions by classical scaling.

    Double-centers the squared distances, takes the top-k eigenpairs of the
    resulting Gram matrix, and scales eigenvectors by the square roots of
    their eigenvalues.  Non-positive eigenvalues (distances that are not
    exactly Euclidean, or rank deficiency) contribute zero columns, so the
    output always has exactly k dimensions.
    """
    n = dm.n
    if k < 1:
        raise ValueError("k must be positive")
    if n <= k:
        raise ValueError(f"classical MDS into {k} dims needs more than {k} points, got {n}")
    sq = dm.full() ** 2
    row_mean = sq.mean(axis=1, keepdims=True)
    col_mean = sq.mean(axis=0, keepdims=True)
    grand = sq.mean()
    gram = -0.5 * (sq - row_mean - col_mean + grand)
    # centering subtracts in different operand orders above/below the
    # diagonal; average the halves so the matrix is symmetric to the bit
    gram = (gram + gram.T) * 0.5
    vals, vecs = kernels.jacobi_eigh(gram)
    coords = np.zeros((n, k), dtype=np.float64)
    for i in range(min(k, n)):
        if vals[i] > 0.0:
            coords[:, i] = vecs[:, i] * np.sqrt(vals[i])
    return EmbeddingMatrix(dm.learner_ids, coords, pipeline="dtw_mds", seed=None)
