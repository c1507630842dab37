"""Backend dispatch for the numeric kernels.

Two interchangeable backends exist: a compiled Cython extension
(``datmine._ckernels``) and a pure-numpy fallback (``datmine._kernels_py``).
They are arithmetic twins, so any difference in results is a bug, not a
tolerance issue.  Selection happens once at import time:

* ``DATMINE_KERNELS=auto`` (default): compiled if importable, else pure.
* ``DATMINE_KERNELS=compiled`` / ``c``: require the extension, raise if absent.
* ``DATMINE_KERNELS=pure`` / ``py``: force the numpy fallback.

``BACKEND`` names the active choice; tests and benchmarks reach both
implementations through ``get_backend``.
"""

from __future__ import annotations

import os
from types import ModuleType

import numpy as np

from . import _kernels_py

_ENV_VAR = "DATMINE_KERNELS"
_PURE_NAMES = {"pure", "py", "python"}
_COMPILED_NAMES = {"compiled", "c", "ext"}


def _load_compiled() -> ModuleType | None:
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels


def _select() -> tuple[str, ModuleType]:
    choice = os.environ.get(_ENV_VAR, "auto").strip().lower()
    if choice in _PURE_NAMES:
        return "pure", _kernels_py
    compiled = _load_compiled()
    if choice in _COMPILED_NAMES:
        if compiled is None:
            raise ImportError(
                f"{_ENV_VAR}={choice} requires the compiled extension, "
                "but datmine._ckernels is not importable"
            )
        return "compiled", compiled
    if choice != "auto":
        raise ValueError(f"unrecognized {_ENV_VAR} value: {choice!r}")
    if compiled is not None:
        return "compiled", compiled
    return "pure", _kernels_py


BACKEND, _impl = _select()


def get_backend(name: str) -> ModuleType:
    """Fetch a backend by name ('pure' or 'compiled') regardless of dispatch."""
    if name in _PURE_NAMES:
        return _kernels_py
    if name in _COMPILED_NAMES:
        compiled = _load_compiled()
        if compiled is None:
            raise ImportError("compiled kernel backend is not available")
        return compiled
    raise ValueError(f"unknown backend name: {name!r}")


def dtw_normalized(s1: np.ndarray, s2: np.ndarray) -> float:
    """Length-normalized DTW distance between two (len, 2) sequences."""
    return _impl.dtw_normalized(s1, s2)


def pairwise_dtw(seqs: list[np.ndarray]) -> np.ndarray:
    """Condensed distances for all pairs, ordered (0,1), (0,2), ..., (n-2,n-1)."""
    return _impl.pairwise_dtw(seqs)


def jacobi_eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric eigendecomposition sorted by descending eigenvalue.

    Returns (values, vectors) with eigenvectors as columns.  Sorting is a
    stable argsort on the negated values so both backends, which return the
    identical unsorted decomposition, also agree after ordering.
    """
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError("matrix must be square")
    if not np.array_equal(arr, arr.T):
        raise ValueError("matrix must be symmetric")
    vals, vecs = _impl.jacobi_eigh(arr)
    order = np.argsort(-vals, kind="stable")
    return vals[order], vecs[:, order]
