"""Shared result types for the embedding pipelines.

An EmbeddingMatrix is the common currency between the three trajectory
embedding routes (handcrafted features, DTW + classical MDS, convolutional
autoencoder) and the 2-D projection stage: one float64 row per learner,
tagged with the pipeline that produced it and the seed it ran under so a
projection can always be traced back to its provenance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Dense (n_learners, n_dims) embedding with row identity and provenance."""

    learner_ids: tuple[str, ...]
    values: np.ndarray
    pipeline: str
    seed: int | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("embedding values must be a 2-D matrix")
        if len(self.learner_ids) != values.shape[0]:
            raise ValueError(
                f"{len(self.learner_ids)} learner ids for {values.shape[0]} rows"
            )
        if len(set(self.learner_ids)) != len(self.learner_ids):
            raise ValueError("learner ids must be unique")
        if not np.all(np.isfinite(values)):
            raise ValueError("embedding values must be finite")
        object.__setattr__(self, "learner_ids", tuple(str(i) for i in self.learner_ids))
        object.__setattr__(self, "values", values)

    @property
    def n_learners(self) -> int:
        return self.values.shape[0]

    @property
    def n_dims(self) -> int:
        return self.values.shape[1]

    def row(self, learner_id: str) -> np.ndarray:
        try:
            idx = self.learner_ids.index(learner_id)
        except ValueError:
            raise KeyError(learner_id) from None
        return self.values[idx]


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric pairwise distances in condensed upper-triangle form.

    ``condensed`` stores the strict upper triangle row by row:
    (0,1), (0,2), ..., (0,n-1), (1,2), ..., (n-2,n-1).
    """

    learner_ids: tuple[str, ...]
    condensed: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        ids = tuple(str(i) for i in self.learner_ids)
        cond = np.asarray(self.condensed, dtype=np.float64)
        n = len(ids)
        if len(set(ids)) != n:
            raise ValueError("learner ids must be unique")
        if cond.ndim != 1 or cond.size != n * (n - 1) // 2:
            raise ValueError(
                f"condensed size {cond.size} does not match {n} ids "
                f"(expected {n * (n - 1) // 2})"
            )
        if not np.all(np.isfinite(cond)) or (cond.size and float(np.min(cond)) < 0.0):
            raise ValueError("distances must be finite and non-negative")
        object.__setattr__(self, "learner_ids", ids)
        object.__setattr__(self, "condensed", cond)

    @property
    def n(self) -> int:
        return len(self.learner_ids)

    def _flat_index(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        n = self.n
        return n * i - i * (i + 1) // 2 + (j - i - 1)

    def get(self, i: int, j: int) -> float:
        """Distance between points i and j (0 on the diagonal)."""
        n = self.n
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError((i, j))
        if i == j:
            return 0.0
        return float(self.condensed[self._flat_index(i, j)])

    def full(self) -> np.ndarray:
        """Expand to a dense symmetric (n, n) matrix with zero diagonal."""
        n = self.n
        out = np.zeros((n, n), dtype=np.float64)
        iu = np.triu_indices(n, 1)
        out[iu] = self.condensed
        out.T[iu] = self.condensed
        return out
