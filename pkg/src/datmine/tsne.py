"""Exact t-SNE for projecting trajectory embeddings to 2-D.

Plain O(n^2) t-SNE: per-point Gaussian bandwidths found by binary search so
each conditional distribution hits the target perplexity, symmetrized
affinities P normalized to sum 1, Student-t low-dimensional affinities Q,
and KL(P||Q) gradient descent with momentum, early exaggeration, and
per-iteration recentering.  Deterministic for a fixed seed (single
threaded); no Barnes-Hut or other approximation, which keeps the math
directly testable at cohort scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import EmbeddingMatrix

_P_FLOOR = 1e-12


@dataclass(frozen=True)
class TsneConfig:
    """Hyperparameters; the momentum/exaggeration schedule follows the
    standard recipe (exaggerate 12x and momentum 0.5 for the first 250
    iterations, then plain P and momentum 0.8)."""

    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum_start: float = 0.5
    momentum_final: float = 0.8
    momentum_switch: int = 250
    seed: int = 0

    def __post_init__(self) -> None:
        if self.perplexity <= 0 or self.iterations < 1 or self.learning_rate <= 0:
            raise ValueError("perplexity, iterations, learning_rate must be positive")
        if self.early_exaggeration < 1.0:
            raise ValueError("early_exaggeration must be >= 1")
        if not (0 <= self.exaggeration_iters <= self.iterations):
            raise ValueError("exaggeration_iters must lie within the iteration budget")


@dataclass(frozen=True)
class TsneResult:
    """2-D coordinates plus the KL trace sampled every 50 iterations."""

    y: np.ndarray
    kl_history: tuple[tuple[int, float], ...]


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """KL(P||Q) = sum p log(p/q) over p > 0, with q floored at 1e-12."""
    p = np.asarray(p, dtype=np.float64)
    q = np.maximum(np.asarray(q, dtype=np.float64), _P_FLOOR)
    mask = p > 0.0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def _conditional_p(sq_dists: np.ndarray, perplexity: float,
                   tol: float = 1e-5, max_iter: int = 50) -> np.ndarray:
    """Row-conditional affinities with per-point bandwidth binary search."""
    n = sq_dists.shape[0]
    target = np.log(perplexity)
    p_cond = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        d = np.delete(sq_dists[i], i)
        beta = 1.0
        beta_lo, beta_hi = 0.0, np.inf
        for _ in range(max_iter):
            w = np.exp(-d * beta)
            sum_w = w.sum()
            if sum_w <= 0.0:
                entropy = 0.0
                p_row = np.zeros_like(d)
            else:
                entropy = np.log(sum_w) + beta * float((d * w).sum()) / sum_w
                p_row = w / sum_w
            diff = entropy - target
            if abs(diff) < tol:
                break
            if diff > 0.0:
                beta_lo = beta
                beta = beta * 2.0 if beta_hi == np.inf else (beta + beta_hi) / 2.0
            else:
                beta_hi = beta
                beta = beta / 2.0 if beta_lo == 0.0 else (beta + beta_lo) / 2.0
        row = np.insert(p_row, i, 0.0)
        p_cond[i] = row
    return p_cond


def joint_affinities(x: np.ndarray, perplexity: float) -> np.ndarray:
    """Symmetrized affinity matrix P with zero diagonal, summing to 1."""
    sq_sum = (x * x).sum(axis=1)
    sq_dists = sq_sum[:, None] - 2.0 * (x @ x.T) + sq_sum[None, :]
    np.fill_diagonal(sq_dists, 0.0)
    sq_dists = np.maximum(sq_dists, 0.0)
    p_cond = _conditional_p(sq_dists, perplexity)
    p = p_cond + p_cond.T
    return p / p.sum()


def tsne(x: np.ndarray, config: TsneConfig | None = None) -> TsneResult:
    """Project (n, k) points to 2-D; deterministic in the config seed.

    Requires n >= 10 finite points and perplexity < n/3.  The KL trace is
    recorded every 50 iterations against the unexaggerated P.
    """
    config = config or TsneConfig()
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 10:
        raise ValueError(f"t-SNE needs an (n >= 10, k) matrix, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("t-SNE input must be finite")
    n = x.shape[0]
    if config.perplexity >= n / 3.0:
        raise ValueError(
            f"perplexity {config.perplexity} infeasible for n={n} (needs < n/3)"
        )

    p = joint_affinities(x, config.perplexity)
    p = np.maximum(p, _P_FLOOR)

    rng = np.random.default_rng(np.random.PCG64(config.seed))
    y = rng.normal(0.0, 1e-4, size=(n, 2))
    update = np.zeros_like(y)
    kl_history: list[tuple[int, float]] = []

    for it in range(config.iterations):
        exaggerating = it < config.exaggeration_iters
        p_eff = p * config.early_exaggeration if exaggerating else p
        momentum = (config.momentum_start if it < config.momentum_switch
                    else config.momentum_final)

        sq_sum = (y * y).sum(axis=1)
        num = 1.0 / (1.0 + sq_sum[:, None] - 2.0 * (y @ y.T) + sq_sum[None, :])
        np.fill_diagonal(num, 0.0)
        q = num / num.sum()

        pq = (p_eff - q) * num
        grad = 4.0 * (np.diag(pq.sum(axis=1)) @ y - pq @ y)

        update = momentum * update - config.learning_rate * grad
        y = y + update
        y = y - y.mean(axis=0)

        if (it + 1) % 50 == 0 or it == config.iterations - 1:
            kl_history.append((it + 1, kl_divergence(p, np.maximum(q, _P_FLOOR))))

    return TsneResult(y, tuple(kl_history))


def project(matrix: EmbeddingMatrix, config: TsneConfig | None = None) -> EmbeddingMatrix:
    """Run t-SNE on an embedding matrix, preserving ids and provenance."""
    config = config or TsneConfig()
    result = tsne(matrix.values, config)
    return EmbeddingMatrix(matrix.learner_ids, result.y,
                           pipeline=f"{matrix.pipeline}+tsne", seed=config.seed)
