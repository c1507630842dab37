"""Pure-numpy implementations of the hot numeric kernels.

These are the reference semantics for the compiled extension: both backends
perform the same floating-point operations in the same per-cell order, so
results agree bit for bit (the extension is compiled with FP contraction
off).  The DTW recurrence is vectorized along anti-diagonals; the Jacobi
sweep vectorizes the row/column rotations.
"""

from __future__ import annotations

import math

import numpy as np

_LEN_SENTINEL = np.int64(2**62)


def dtw_normalized(s1: np.ndarray, s2: np.ndarray) -> float:
    """Length-normalized DTW distance between two 2-D point sequences.

    Standard match/insert/delete dynamic program with Euclidean point cost
    and no band constraint.  Among minimum-cost warping paths the shortest
    is preferred (deterministic and symmetric); the accumulated cost is
    divided by that path's number of matched pairs.
    """
    a = np.ascontiguousarray(s1, dtype=np.float64)
    b = np.ascontiguousarray(s2, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != 2 or b.shape[1] != 2:
        raise ValueError("sequences must have shape (len, 2)")
    n, m = a.shape[0], b.shape[0]
    if n == 0 or m == 0:
        raise ValueError("sequences must be non-empty")

    dx = a[:, 0][:, None] - b[:, 0][None, :]
    dy = a[:, 1][:, None] - b[:, 1][None, :]
    cost = np.sqrt(dx * dx + dy * dy)

    acc = np.empty((n, m), dtype=np.float64)
    plen = np.empty((n, m), dtype=np.int64)
    acc[0, :] = np.cumsum(cost[0, :])
    acc[:, 0] = np.cumsum(cost[:, 0])
    plen[0, :] = np.arange(1, m + 1)
    plen[:, 0] = np.arange(1, n + 1)

    for d in range(2, n + m - 1):
        i_lo = max(1, d - (m - 1))
        i_hi = min(n - 1, d - 1)
        if i_lo > i_hi:
            continue
        rows = np.arange(i_lo, i_hi + 1)
        cols = d - rows
        c_up = acc[rows - 1, cols]
        c_lf = acc[rows, cols - 1]
        c_dg = acc[rows - 1, cols - 1]
        best = np.minimum(np.minimum(c_up, c_lf), c_dg)
        bl = np.where(c_up == best, plen[rows - 1, cols], _LEN_SENTINEL)
        bl = np.minimum(bl, np.where(c_lf == best, plen[rows, cols - 1], _LEN_SENTINEL))
        bl = np.minimum(bl, np.where(c_dg == best, plen[rows - 1, cols - 1], _LEN_SENTINEL))
        acc[rows, cols] = best + cost[rows, cols]
        plen[rows, cols] = bl + 1

    return float(acc[n - 1, m - 1] / plen[n - 1, m - 1])


def pairwise_dtw(seqs: list[np.ndarray]) -> np.ndarray:
    """Condensed upper-triangle matrix of normalized DTW distances."""
    n = len(seqs)
    arrs = [np.ascontiguousarray(s, dtype=np.float64) for s in seqs]
    out = np.empty(n * (n - 1) // 2, dtype=np.float64)
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            out[k] = dtw_normalized(arrs[i], arrs[j])
            k += 1
    return out


def jacobi_eigh(a: np.ndarray, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors-as-columns), unsorted.  Convergence is
    declared when every off-diagonal magnitude drops below 1e-13 relative to
    the largest diagonal magnitude.
    """
    A = np.array(a, dtype=np.float64, copy=True, order="C")
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    n = A.shape[0]
    V = np.eye(n, dtype=np.float64)
    if n == 1:
        return np.diag(A).copy(), V
    iu = np.triu_indices(n, 1)
    for _ in range(max_sweeps):
        diag_scale = max(1.0, float(np.max(np.abs(np.diagonal(A)))))
        if float(np.max(np.abs(A[iu]))) <= 1e-13 * diag_scale:
            return np.diagonal(A).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                sign = 1.0 if theta >= 0.0 else -1.0
                t = sign / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = 0.0
                A[q, p] = 0.0
                v_p = V[:, p].copy()
                v_q = V[:, q].copy()
                V[:, p] = c * v_p - s * v_q
                V[:, q] = s * v_p + c * v_q
    raise ArithmeticError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")
