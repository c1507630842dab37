"""t-SNE affinities, the optimizer loop, and the projection wrapper."""

from __future__ import annotations

import numpy as np
import pytest

from datmine.embedding import EmbeddingMatrix
from datmine.tsne import (
    TsneConfig,
    joint_affinities,
    kl_divergence,
    project,
    tsne,
)


def blobs(n_per=15, seed=0, spread=0.05):
    """Three well-separated Gaussian blobs in 5-D, with labels."""
    rng = np.random.default_rng(seed)
    centers = np.array([
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [10.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 10.0, 0.0, 0.0, 0.0],
    ])
    points = np.vstack([
        center + rng.normal(0.0, spread, size=(n_per, 5))
        for center in centers
    ])
    labels = np.repeat(np.arange(3), n_per)
    return points, labels


class TestAffinities:
    def test_symmetric_zero_diagonal_sums_to_one(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(20, 4))
        p = joint_affinities(x, perplexity=5.0)
        assert p.shape == (20, 20)
        np.testing.assert_array_equal(p, p.T)
        assert np.all(np.diag(p) == 0.0)
        assert p.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(p >= 0.0)

    def test_perplexity_sets_conditional_entropy(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(30, 3))
        for perplexity in (5.0, 9.0):
            sq_sum = (x * x).sum(axis=1)
            sq = sq_sum[:, None] - 2.0 * (x @ x.T) + sq_sum[None, :]
            np.fill_diagonal(sq, 0.0)
            from datmine.tsne import _conditional_p
            p_cond = _conditional_p(np.maximum(sq, 0.0), perplexity)
            # each row's Shannon entropy should sit at log(perplexity)
            for i in range(30):
                row = p_cond[i][p_cond[i] > 0.0]
                entropy = -np.sum(row * np.log(row))
                assert entropy == pytest.approx(np.log(perplexity), abs=1e-4)

    def test_near_neighbors_get_more_mass(self):
        x = np.array([[0.0], [0.1], [5.0], [5.1], [10.0], [10.1],
                      [15.0], [15.1], [20.0], [20.1], [25.0], [25.1]])
        p = joint_affinities(x, perplexity=2.0)
        # each point's affinity to its pair dwarfs any cross-pair affinity
        for i in range(0, 12, 2):
            partner = p[i, i + 1]
            others = np.delete(p[i], [i, i + 1])
            assert partner > 5.0 * others.max()


class TestKl:
    def test_zero_when_identical(self):
        p = np.array([0.25, 0.25, 0.25, 0.25])
        assert kl_divergence(p, p) == 0.0

    def test_positive_when_different(self):
        p = np.array([0.7, 0.3])
        q = np.array([0.3, 0.7])
        hand = 0.7 * np.log(0.7 / 0.3) + 0.3 * np.log(0.3 / 0.7)
        assert kl_divergence(p, q) == pytest.approx(hand, rel=1e-12)

    def test_zero_p_entries_contribute_nothing(self):
        assert kl_divergence(np.array([1.0, 0.0]),
                             np.array([1.0, 0.5])) == 0.0

    def test_q_floor_keeps_result_finite(self):
        val = kl_divergence(np.array([0.5, 0.5]), np.array([0.5, 0.0]))
        assert np.isfinite(val)
        assert val == pytest.approx(0.5 * np.log(0.5 / 1e-12), rel=1e-9)


class TestOptimizer:
    def test_blob_structure_survives_projection(self):
        points, labels = blobs()
        result = tsne(points, TsneConfig(perplexity=10.0, iterations=1000,
                                         learning_rate=50.0, seed=0))
        y = result.y
        assert y.shape == (45, 2)
        # within-blob spread must be far below between-blob separation
        centroids = np.array([y[labels == c].mean(axis=0) for c in range(3)])
        within = max(
            np.linalg.norm(y[labels == c] - centroids[c], axis=1).max()
            for c in range(3)
        )
        between = min(
            np.linalg.norm(centroids[a] - centroids[b])
            for a in range(3) for b in range(a + 1, 3)
        )
        assert between > 5.0 * within

    def test_kl_trace_sampled_and_decreasing(self):
        points, _ = blobs(n_per=12, seed=3)
        result = tsne(points, TsneConfig(perplexity=8.0, iterations=300,
                                         exaggeration_iters=100, seed=1))
        its = [it for it, _ in result.kl_history]
        assert its == [50, 100, 150, 200, 250, 300]
        kls = [kl for _, kl in result.kl_history]
        assert all(np.isfinite(k) and k >= 0.0 for k in kls)
        # samples from iteration 150 on are measured after exaggeration
        # lifted; from there the KL must keep improving
        post = kls[2:]
        assert all(a >= b for a, b in zip(post, post[1:]))
        assert post[-1] < post[0]

    def test_output_centered_each_iteration(self):
        points, _ = blobs(n_per=10, seed=4)
        result = tsne(points, TsneConfig(perplexity=6.0, iterations=60,
                                         exaggeration_iters=30, seed=2))
        np.testing.assert_allclose(result.y.mean(axis=0), 0.0, atol=1e-9)

    def test_deterministic_per_seed(self):
        points, _ = blobs(n_per=10, seed=5)
        config = TsneConfig(perplexity=6.0, iterations=80,
                            exaggeration_iters=40, seed=9)
        a = tsne(points, config)
        b = tsne(points, config)
        np.testing.assert_array_equal(a.y, b.y)
        assert a.kl_history == b.kl_history
        c = tsne(points, TsneConfig(perplexity=6.0, iterations=80,
                                    exaggeration_iters=40, seed=10))
        assert not np.array_equal(a.y, c.y)

    def test_input_validation(self):
        with pytest.raises(ValueError, match="n >= 10"):
            tsne(np.zeros((5, 3)))
        with pytest.raises(ValueError, match="finite"):
            bad = np.zeros((12, 3))
            bad[0, 0] = np.nan
            tsne(bad)
        with pytest.raises(ValueError, match="infeasible"):
            tsne(np.random.default_rng(0).normal(size=(12, 3)),
                 TsneConfig(perplexity=4.0))

    @pytest.mark.parametrize("kwargs", [
        dict(perplexity=0.0),
        dict(iterations=0),
        dict(learning_rate=0.0),
        dict(early_exaggeration=0.5),
        dict(exaggeration_iters=2000),
    ])
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            TsneConfig(**kwargs)


class TestProject:
    def test_ids_and_provenance_carried(self):
        points, _ = blobs(n_per=10, seed=6)
        ids = tuple(f"L{i:02d}" for i in range(30))
        matrix = EmbeddingMatrix(ids, points, pipeline="features", seed=None)
        projected = project(matrix, TsneConfig(perplexity=6.0, iterations=50,
                                               exaggeration_iters=25,
                                               seed=4))
        assert projected.learner_ids == ids
        assert projected.pipeline == "features+tsne"
        assert projected.seed == 4
        assert projected.values.shape == (30, 2)

    def test_pipeline_suffix_tracks_source(self):
        points, _ = blobs(n_per=10, seed=7)
        ids = tuple(f"L{i}" for i in range(30))
        matrix = EmbeddingMatrix(ids, points, pipeline="cnn_ae", seed=3)
        projected = project(matrix, TsneConfig(perplexity=6.0, iterations=50,
                                               exaggeration_iters=25,
                                               seed=0))
        assert projected.pipeline == "cnn_ae+tsne"
