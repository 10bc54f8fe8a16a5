"""Kernel selection: compiled extension when available, numpy fallback otherwise.

Set CASCADEKIT_PURE_KERNELS=1 to force the fallback (used by the benchmark
and by tests that compare the two implementations).
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("CASCADEKIT_PURE_KERNELS"):
    _impl = _kernels_py
    BACKEND = "pure"
else:
    try:
        from . import _kernels_c as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "pure"

bfs_depths = _impl.bfs_depths
bfs_distance_stats = _impl.bfs_distance_stats


def build_csr(src, dst, n):
    """CSR adjacency (indptr, indices) from edge index arrays, int32 throughout."""
    src = np.asarray(src, dtype=np.int32)
    dst = np.asarray(dst, dtype=np.int32)
    counts = np.bincount(src, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int32)
    np.cumsum(counts, out=indptr[1:])
    order = np.argsort(src, kind="stable")
    indices = np.ascontiguousarray(dst[order], dtype=np.int32)
    return indptr, indices


def build_undirected_csr(src, dst, n):
    """CSR of the simple undirected view: symmetrized, deduplicated, loops dropped."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    nonloop = src != dst
    a = np.concatenate([src[nonloop], dst[nonloop]])
    b = np.concatenate([dst[nonloop], src[nonloop]])
    keys = np.unique(a * n + b)
    return build_csr(keys // n, keys % n, n)
