# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twin of the pure-numpy kernels.

Every kernel performs the same floating-point operations in the same
per-cell order as ``_kernels_py``; combined with -ffp-contract=off this
makes the two backends bit-identical, so callers and tests may treat the
backend choice as invisible.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

ctypedef cnp.float64_t f64
ctypedef cnp.int64_t i64


cdef double _dtw_kernel(const f64[:, ::1] a, const f64[:, ::1] b,
                        f64[:, ::1] acc, i64[:, ::1] plen) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    cdef Py_ssize_t i, j
    cdef double dx, dy, cost, c_up, c_lf, c_dg, best
    cdef i64 l_up, l_lf, l_dg, bl

    dx = a[0, 0] - b[0, 0]
    dy = a[0, 1] - b[0, 1]
    acc[0, 0] = sqrt(dx * dx + dy * dy)
    plen[0, 0] = 1
    for j in range(1, m):
        dx = a[0, 0] - b[j, 0]
        dy = a[0, 1] - b[j, 1]
        acc[0, j] = acc[0, j - 1] + sqrt(dx * dx + dy * dy)
        plen[0, j] = j + 1
    for i in range(1, n):
        dx = a[i, 0] - b[0, 0]
        dy = a[i, 1] - b[0, 1]
        acc[i, 0] = acc[i - 1, 0] + sqrt(dx * dx + dy * dy)
        plen[i, 0] = i + 1

    for i in range(1, n):
        for j in range(1, m):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            cost = sqrt(dx * dx + dy * dy)
            c_up = acc[i - 1, j]
            l_up = plen[i - 1, j]
            c_lf = acc[i, j - 1]
            l_lf = plen[i, j - 1]
            c_dg = acc[i - 1, j - 1]
            l_dg = plen[i - 1, j - 1]
            best = c_up
            bl = l_up
            if c_lf < best or (c_lf == best and l_lf < bl):
                best = c_lf
                bl = l_lf
            if c_dg < best or (c_dg == best and l_dg < bl):
                best = c_dg
                bl = l_dg
            acc[i, j] = best + cost
            plen[i, j] = bl + 1

    return acc[n - 1, m - 1] / <double>plen[n - 1, m - 1]


def dtw_normalized(s1, s2):
    """Length-normalized DTW distance between two 2-D point sequences."""
    a = np.ascontiguousarray(s1, dtype=np.float64)
    b = np.ascontiguousarray(s2, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != 2 or b.shape[1] != 2:
        raise ValueError("sequences must have shape (len, 2)")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("sequences must be non-empty")
    acc = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    plen = np.empty((a.shape[0], b.shape[0]), dtype=np.int64)
    return _dtw_kernel(a, b, acc, plen)


def pairwise_dtw(seqs):
    """Condensed upper-triangle matrix of normalized DTW distances."""
    cdef Py_ssize_t n = len(seqs)
    arrs = [np.ascontiguousarray(s, dtype=np.float64) for s in seqs]
    cdef Py_ssize_t max_len = 0
    for s in arrs:
        if s.ndim != 2 or s.shape[1] != 2:
            raise ValueError("sequences must have shape (len, 2)")
        if s.shape[0] == 0:
            raise ValueError("sequences must be non-empty")
        if s.shape[0] > max_len:
            max_len = s.shape[0]
    out = np.empty(n * (n - 1) // 2, dtype=np.float64)
    if n < 2:
        return out
    acc = np.empty((max_len, max_len), dtype=np.float64)
    plen = np.empty((max_len, max_len), dtype=np.int64)
    cdef f64[:, ::1] acc_v = acc
    cdef i64[:, ::1] plen_v = plen
    cdef f64[::1] out_v = out
    cdef Py_ssize_t i, j, k = 0
    cdef f64[:, ::1] av, bv
    for i in range(n):
        av = arrs[i]
        for j in range(i + 1, n):
            bv = arrs[j]
            out_v[k] = _dtw_kernel(av, bv, acc_v, plen_v)
            k += 1
    return out


def jacobi_eigh(a, int max_sweeps=100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors-as-columns), unsorted; same
    convergence rule as the pure backend.
    """
    A = np.array(a, dtype=np.float64, copy=True, order="C")
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    cdef Py_ssize_t n = A.shape[0]
    V = np.eye(n, dtype=np.float64)
    if n == 1:
        return np.diagonal(A).copy(), V
    cdef f64[:, ::1] Am = A
    cdef f64[:, ::1] Vm = V
    cdef Py_ssize_t sweep, p, q, k
    cdef double diag_scale, off, apq, theta, sign, t, c, s, xp, xq
    for sweep in range(max_sweeps):
        diag_scale = 1.0
        for k in range(n):
            if fabs(Am[k, k]) > diag_scale:
                diag_scale = fabs(Am[k, k])
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                if fabs(Am[p, q]) > off:
                    off = fabs(Am[p, q])
        if off <= 1e-13 * diag_scale:
            return np.diagonal(A).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = Am[p, q]
                if apq == 0.0:
                    continue
                theta = (Am[q, q] - Am[p, p]) / (2.0 * apq)
                sign = 1.0 if theta >= 0.0 else -1.0
                t = sign / (fabs(theta) + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    xp = Am[k, p]
                    xq = Am[k, q]
                    Am[k, p] = c * xp - s * xq
                    Am[k, q] = s * xp + c * xq
                for k in range(n):
                    xp = Am[p, k]
                    xq = Am[q, k]
                    Am[p, k] = c * xp - s * xq
                    Am[q, k] = s * xp + c * xq
                Am[p, q] = 0.0
                Am[q, p] = 0.0
                for k in range(n):
                    xp = Vm[k, p]
                    xq = Vm[k, q]
                    Vm[k, p] = c * xp - s * xq
                    Vm[k, q] = s * xp + c * xq
    raise ArithmeticError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")
