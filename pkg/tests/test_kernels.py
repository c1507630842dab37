"""Kernel dispatch plus equivalence of the compiled and pure backends.

The compiled extension must be a bit-identical twin of the numpy fallback:
same candidate ordering in the DTW recurrence, same rotation arithmetic in
the eigensolver, compiled with FP contraction off.  Tests therefore compare
with == on floats, not approx.
"""

from __future__ import annotations

import numpy as np
import pytest

from datmine import kernels
from tests.oracles import brute_dtw

HAVE_COMPILED = True
try:
    kernels.get_backend("compiled")
except ImportError:  # pragma: no cover - depends on build environment
    HAVE_COMPILED = False

both_backends = pytest.mark.skipif(
    not HAVE_COMPILED, reason="compiled extension not built")


def random_series(rng, max_len=24, lo=2):
    n = int(rng.integers(lo, max_len + 1))
    return np.ascontiguousarray(rng.random((n, 2)))


def test_backend_selection_reports_something_valid():
    assert kernels.BACKEND in ("compiled", "pure")


def test_get_backend_rejects_unknown():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_dtw_matches_brute_force_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a = random_series(rng, max_len=6, lo=1)
        b = random_series(rng, max_len=6, lo=1)
        assert kernels.dtw_normalized(a, b) == brute_dtw(a, b)


def test_dtw_symmetry_and_self_distance():
    rng = np.random.default_rng(1)
    for _ in range(300):
        a = random_series(rng)
        b = random_series(rng)
        assert kernels.dtw_normalized(a, b) == kernels.dtw_normalized(b, a)
        assert kernels.dtw_normalized(a, a) == 0.0


def test_pairwise_matches_single_calls():
    rng = np.random.default_rng(2)
    series = [random_series(rng) for _ in range(12)]
    condensed = kernels.pairwise_dtw(series)
    k = 0
    for i in range(len(series)):
        for j in range(i + 1, len(series)):
            assert condensed[k] == kernels.dtw_normalized(series[i], series[j])
            k += 1
    assert k == condensed.shape[0]


@both_backends
def test_dtw_bit_identical_across_backends():
    pure = kernels.get_backend("pure")
    comp = kernels.get_backend("compiled")
    rng = np.random.default_rng(3)
    for _ in range(150):
        a = random_series(rng)
        b = random_series(rng)
        assert pure.dtw_normalized(a, b) == comp.dtw_normalized(a, b)


@both_backends
def test_pairwise_bit_identical_across_backends():
    pure = kernels.get_backend("pure")
    comp = kernels.get_backend("compiled")
    rng = np.random.default_rng(4)
    series = [random_series(rng) for _ in range(20)]
    assert np.array_equal(pure.pairwise_dtw(series), comp.pairwise_dtw(series))


def _random_symmetric(rng, n):
    m = rng.standard_normal((n, n))
    return (m + m.T) / 2.0


def test_jacobi_matches_lapack():
    rng = np.random.default_rng(5)
    for n in (2, 3, 5, 10, 25):
        a = _random_symmetric(rng, n)
        vals, vecs = kernels.jacobi_eigh(a)
        ref_vals = np.linalg.eigvalsh(a)[::-1]  # ours sorts descending
        assert np.allclose(vals, ref_vals, atol=1e-10)
        # eigenvector property and orthonormality, sign-independent
        assert np.allclose(a @ vecs, vecs * vals, atol=1e-9)
        assert np.allclose(vecs.T @ vecs, np.eye(n), atol=1e-10)


def test_jacobi_descending_order():
    rng = np.random.default_rng(6)
    vals, _ = kernels.jacobi_eigh(_random_symmetric(rng, 12))
    assert np.all(np.diff(vals) <= 0)


def test_jacobi_diagonal_matrix_exact():
    vals, vecs = kernels.jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
    assert np.array_equal(vals, np.array([3.0, 2.0, -1.0]))
    assert np.allclose(np.abs(vecs), np.eye(3)[:, [0, 2, 1]], atol=0)


@both_backends
def test_jacobi_bit_identical_across_backends():
    pure = kernels.get_backend("pure")
    comp = kernels.get_backend("compiled")
    rng = np.random.default_rng(7)
    for n in (2, 4, 8, 16, 30):
        a = _random_symmetric(rng, n)
        pv, pvecs = pure.jacobi_eigh(a)
        cv, cvecs = comp.jacobi_eigh(a)
        assert np.array_equal(pv, cv)
        assert np.array_equal(pvecs, cvecs)


def test_jacobi_rejects_non_symmetric():
    with pytest.raises(ValueError):
        kernels.jacobi_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_dtw_rejects_empty():
    with pytest.raises(ValueError):
        kernels.dtw_normalized(np.empty((0, 2)), np.ones((3, 2)))
